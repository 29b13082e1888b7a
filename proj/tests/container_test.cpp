#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "hybridrt/container.hpp"
#include "support/test_components.hpp"

using namespace hybridrt;
using namespace hybridrt::testing;

namespace {

class ContainerTest : public ::testing::Test {
 protected:
  void SetUp() override { register_test_types(c); }

  std::vector<std::string> observed(const std::string& name) {
    std::vector<std::string> out;
    for (const auto& e : log) {
      if (e.name == name) out.push_back(e.source);
    }
    return out;
  }

  void record_events() {
    c.events().register_handler({kWildcard, kWildcard, 0, HandlerOrigin::kFramework, [this](const Event& e) {
                                   log.push_back(e);
                                   return Disposition::kContinue;
                                 }});
  }

  std::vector<Event> log;
  Container c;
};

TEST_F(ContainerTest, RegisterAndLoad) {
  auto rec = c.load_component("", "q1", "TestQueue");
  EXPECT_EQ(rec.state, LifecycleState::kLoaded);
  EXPECT_EQ(rec.type_id, "TestQueue");
  EXPECT_EQ(rec.interfaces.size(), 2u);
}

TEST_F(ContainerTest, DuplicateTypeRejected) {
  try {
    c.register_component_type("TestQueue", [] { return std::make_shared<TestQueue>(); });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDuplicateType);
  }
}

TEST_F(ContainerTest, UnknownTypeRejected) {
  try {
    c.load_component("", "x", "Nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownType);
  }
}

TEST_F(ContainerTest, DuplicateIdRejected) {
  c.load_component("", "q1", "TestQueue");
  try {
    c.load_component("", "q1", "Sink");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDuplicateId);
  }
}

TEST_F(ContainerTest, ConfigSeedsProperties) {
  auto rec = c.load_component("", "e", "EchoService", {{"tag", std::string("t")}, {"n", std::int64_t{3}}});
  EXPECT_EQ(as_string(rec.properties.at("tag")), "t");
  EXPECT_EQ(as_int(*c.component("e")->property("n")), 3);
}

TEST_F(ContainerTest, ChildContextVisibleRecursively) {
  c.load_component("", "outer", "Composite");
  std::string inner = c.create_inner_context("outer");
  EXPECT_EQ(inner, "outer");
  auto rec = c.load_component(inner, "q", "TestQueue");
  EXPECT_EQ(rec.id, "outer/q");

  auto flat = c.list_components("", false);
  auto deep = c.list_components("", true);
  std::set<std::string> flat_ids, deep_ids;
  for (auto& r : flat) flat_ids.insert(r.id);
  for (auto& r : deep) deep_ids.insert(r.id);
  EXPECT_EQ(flat_ids, (std::set<std::string>{"outer"}));
  EXPECT_EQ(deep_ids, (std::set<std::string>{"outer", "outer/q"}));
  EXPECT_EQ(c.parent_context("outer"), std::optional<std::string>(""));
}

TEST_F(ContainerTest, SecondInnerContextRejected) {
  c.load_component("", "outer", "Composite");
  c.create_inner_context("outer");
  EXPECT_THROW(c.create_inner_context("outer"), Error);
}

TEST_F(ContainerTest, FullLegalWalk) {
  c.load_component("", "e", "EchoService");
  EXPECT_EQ(c.set_lifecycle("e", LifecycleState::kActive).state, LifecycleState::kActive);
  EXPECT_EQ(c.set_lifecycle("e", LifecycleState::kDeactivated).state, LifecycleState::kDeactivated);
  EXPECT_EQ(c.set_lifecycle("e", LifecycleState::kActive).state, LifecycleState::kActive);
  c.unload("e");
  EXPECT_FALSE(c.contains("e"));
}

TEST_F(ContainerTest, ActivatingActiveIsNoop) {
  record_events();
  c.load_component("", "e", "EchoService");
  c.set_lifecycle("e", LifecycleState::kActive);
  c.set_lifecycle("e", LifecycleState::kActive);
  EXPECT_EQ(observed(events::kActivated).size(), 1u);
}

TEST_F(ContainerTest, UnloadedComponentAcceptsNothing) {
  c.load_component("", "e", "EchoService");
  c.unload("e");
  for (auto op : std::vector<std::function<void()>>{
           [&] { c.set_lifecycle("e", LifecycleState::kActive); },
           [&] { c.configure("e", "k", std::int64_t{1}); },
           [&] { c.describe_interfaces("e"); },
       }) {
    try {
      op();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::kUnknownComponent);
    }
  }
}

TEST_F(ContainerTest, DeactivateFromLoadedIsIllegal) {
  c.load_component("", "e", "EchoService");
  try {
    c.set_lifecycle("e", LifecycleState::kDeactivated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIllegalTransition);
  }
  EXPECT_EQ(c.record("e").state, LifecycleState::kLoaded);
}

// Oracle: the legal edges written out by hand.
bool legal_edge(LifecycleState from, LifecycleState to) {
  using S = LifecycleState;
  static const std::set<std::pair<S, S>> edges{
      {S::kLoaded, S::kActive},         {S::kActive, S::kDeactivated}, {S::kDeactivated, S::kActive},
      {S::kActive, S::kActive},         {S::kLoaded, S::kUnloaded},    {S::kActive, S::kUnloaded},
      {S::kDeactivated, S::kUnloaded},
  };
  return edges.count({from, to}) > 0;
}

TEST_F(ContainerTest, PropertyRandomLifecycleWalks) {
  std::mt19937 rng(1234);
  const LifecycleState targets[] = {LifecycleState::kActive, LifecycleState::kDeactivated,
                                    LifecycleState::kUnloaded};
  for (int walk = 0; walk < 200; ++walk) {
    std::string id = "w" + std::to_string(walk);
    c.load_component("", id, "EchoService");
    LifecycleState model = LifecycleState::kLoaded;
    for (int step = 0; step < 12 && model != LifecycleState::kUnloaded; ++step) {
      LifecycleState target = targets[rng() % 3];
      bool ok = true;
      try {
        c.set_lifecycle(id, target);
      } catch (const Error& e) {
        ok = false;
        EXPECT_EQ(e.code(), Errc::kIllegalTransition);
      }
      ASSERT_EQ(ok, legal_edge(model, target));
      if (ok) model = target;
      if (model != LifecycleState::kUnloaded) {
        auto state = c.record(id).state;
        ASSERT_EQ(state, model);
        ASSERT_NE(state, LifecycleState::kUnloaded);
      } else {
        ASSERT_FALSE(c.contains(id));
      }
    }
  }
}

TEST_F(ContainerTest, DescribeInterfacesIsStableAndComplete) {
  c.load_component("", "q", "TestQueue");
  auto a = c.describe_interfaces("q");
  auto b = c.describe_interfaces("q");
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].endpoint, b[i].endpoint);
    EXPECT_NE(a[i].endpoint, nullptr);
  }
  // DataQueue shape: both DATA interfaces are PROVIDED, no REQUIRED "input".
  EXPECT_TRUE(std::none_of(a.begin(), a.end(), [](auto& d) { return d.direction == Direction::kRequired; }));
}

TEST_F(ContainerTest, DescribeUnknownComponent) {
  try {
    c.describe_interfaces("ghost");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownComponent);
  }
}

TEST_F(ContainerTest, BrokerSameContext) {
  c.load_component("", "e", "EchoService");
  auto found = c.broker("", Style::kService, "Bytes");
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0], (InterfaceRef{"e", "echo"}));
}

TEST_F(ContainerTest, BrokerFallsBackToParent) {
  c.load_component("", "e", "EchoService");
  c.load_component("", "outer", "Composite");
  auto ctx = c.create_inner_context("outer");
  auto found = c.broker(ctx, Style::kService, "Bytes");
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].component, "e");
}

TEST_F(ContainerTest, BrokerEmpty) { EXPECT_TRUE(c.broker("", Style::kService, "Bytes").empty()); }

TEST_F(ContainerTest, BrokerPrefersNearestContext) {
  c.load_component("", "far", "EchoService");
  c.load_component("", "outer", "Composite");
  auto ctx = c.create_inner_context("outer");
  c.load_component(ctx, "near", "EchoService");
  auto found = c.broker(ctx, Style::kService, "Bytes");
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].component, "outer/near");
}

// Exhaustive over trees of depth <= 3: a chain root -> a -> a/b plus a sibling
// root -> s, with every subset of contexts holding a provider.
TEST_F(ContainerTest, PropertyBrokerCompleteness) {
  const std::vector<std::string> contexts{"", "a", "a/b", "s"};
  const std::map<std::string, std::vector<std::string>> ancestry{
      {"", {""}}, {"a", {"a", ""}}, {"a/b", {"a/b", "a", ""}}, {"s", {"s", ""}}};
  for (unsigned mask = 0; mask < 16; ++mask) {
    Container k;
    register_test_types(k);
    k.load_component("", "a", "Composite");
    k.create_inner_context("a");
    k.load_component("a", "b", "Composite");
    k.create_inner_context("a/b");
    k.load_component("", "s", "Composite");
    k.create_inner_context("s");
    std::set<std::string> holders;
    for (std::size_t i = 0; i < contexts.size(); ++i) {
      if (mask & (1u << i)) {
        k.load_component(contexts[i], "p", "EchoService");
        holders.insert(contexts[i]);
      }
    }
    for (const auto& ctx : contexts) {
      std::optional<std::string> expected;
      for (const auto& anc : ancestry.at(ctx)) {
        if (holders.count(anc)) {
          expected = anc.empty() ? "p" : anc + "/p";
          break;
        }
      }
      auto found = k.broker(ctx, Style::kService, "Bytes");
      if (expected) {
        ASSERT_EQ(found.size(), 1u) << "mask " << mask << " ctx " << ctx;
        EXPECT_EQ(found[0].component, *expected);
      } else {
        EXPECT_TRUE(found.empty()) << "mask " << mask << " ctx " << ctx;
      }
    }
  }
}

TEST_F(ContainerTest, ExplicitBindEmitsBound) {
  record_events();
  c.load_component("", "cl", "Client");
  c.load_component("", "q", "TestQueue");
  auto b = c.bind({"cl", "source"}, {"q", "pull"});
  EXPECT_EQ(b.mode, BindingMode::kExplicit);
  EXPECT_EQ(observed(events::kBound), std::vector<std::string>{"cl"});
  EXPECT_EQ(c.bindings().size(), 1u);
}

TEST_F(ContainerTest, IncompatibleBindRejected) {
  c.load_component("", "cl", "Client");
  c.load_component("", "q", "TestQueue");
  try {
    c.bind({"cl", "svc"}, {"q", "pull"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kIncompatibleInterfaces);
  }
  // Pull client against the push-in interface is a flow mismatch.
  EXPECT_THROW(c.bind({"cl", "source"}, {"q", "input"}), Error);
  EXPECT_TRUE(c.bindings().empty());
}

TEST_F(ContainerTest, UnicastAlreadyBound) {
  c.load_component("", "cl", "Client");
  c.load_component("", "q1", "TestQueue");
  c.load_component("", "q2", "TestQueue");
  c.bind({"cl", "source"}, {"q1", "pull"});
  try {
    c.bind({"cl", "source"}, {"q2", "pull"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kAlreadyBound);
  }
}

TEST_F(ContainerTest, ImplicitBindPicksFirstInBrokerOrder) {
  // Register the two providers in both orders; the pick follows the order.
  for (bool swap : {false, true}) {
    Container k;
    register_test_types(k);
    k.load_component("", swap ? "e2" : "e1", "EchoService");
    k.load_component("", swap ? "e1" : "e2", "EchoService");
    k.load_component("", "cl", "Client");
    auto b = k.bind_implicit({"cl", "svc"});
    EXPECT_EQ(b.server.component, swap ? "e2" : "e1");
    EXPECT_EQ(b.mode, BindingMode::kImplicit);
  }
}

TEST_F(ContainerTest, ImplicitBindCrossesIntoParent) {
  c.load_component("", "e", "EchoService");
  c.load_component("", "outer", "Composite");
  auto ctx = c.create_inner_context("outer");
  c.load_component(ctx, "cl", "Client");
  auto b = c.bind_implicit({"outer/cl", "svc"});
  EXPECT_EQ(b.server.component, "e");
}

TEST_F(ContainerTest, ConfigureEmitsPropertyEvent) {
  record_events();
  c.load_component("", "cl", "Client");
  c.configure("cl", "server_address", std::string("127.0.0.1:7001"));
  EXPECT_EQ(as_string(*c.component("cl")->property("server_address")), "127.0.0.1:7001");
  ASSERT_EQ(observed(events::kProperty).size(), 1u);
}

TEST_F(ContainerTest, ConfigureRejectedValue) {
  c.load_component("", "cl", "Client");
  try {
    c.configure("cl", "port", std::int64_t{-1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kRejectedValue);
  }
  EXPECT_FALSE(c.component("cl")->property("port").has_value());
}

TEST_F(ContainerTest, ConfigureUnknownComponent) {
  try {
    c.configure("ghost", "k", std::int64_t{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownComponent);
  }
}

TEST_F(ContainerTest, HotSwapRebindsImplicitClient) {
  record_events();
  c.load_component("", "e1", "EchoService", {{"tag", std::string("one")}});
  c.load_component("", "e2", "EchoService", {{"tag", std::string("two")}});
  c.load_component("", "cl", "Client");
  c.set_lifecycle("e1", LifecycleState::kActive);
  c.set_lifecycle("e2", LifecycleState::kActive);
  c.bind_implicit({"cl", "svc"});
  auto client = c.component_as<Client>("cl");
  EXPECT_EQ(client->svc->call(bytes({"x"})).items.back(), "one");

  c.unload("e1");
  auto b = c.bindings_of("cl");
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].server.component, "e2");
  EXPECT_EQ(c.hot_swaps(), 1u);
  EXPECT_EQ(client->svc->call(bytes({"x"})).items.back(), "two");
  EXPECT_EQ(observed(events::kHotSwapped), std::vector<std::string>{"cl"});
}

TEST_F(ContainerTest, HotSwapSkipsStatefulProviders) {
  c.load_component("", "e1", "EchoService");
  c.load_component("", "st", "StatefulEcho");
  c.load_component("", "cl", "Client");
  c.bind_implicit({"cl", "svc"});
  c.unload("e1");
  EXPECT_TRUE(c.bindings_of("cl").empty());
  EXPECT_EQ(c.hot_swaps(), 0u);
}

TEST_F(ContainerTest, ExplicitBindingNotSwapped) {
  c.load_component("", "e1", "EchoService");
  c.load_component("", "e2", "EchoService");
  c.load_component("", "cl", "Client");
  c.bind({"cl", "svc"}, {"e1", "echo"});
  c.unload("e1");
  EXPECT_TRUE(c.bindings_of("cl").empty());
}

TEST_F(ContainerTest, PropertyUnloadHygiene) {
  std::mt19937 rng(77);
  for (int round = 0; round < 30; ++round) {
    Container k;
    register_test_types(k);
    std::vector<std::string> providers;
    for (int i = 0; i < 4; ++i) {
      providers.push_back("e" + std::to_string(i));
      k.load_component("", providers.back(), "EchoService");
    }
    for (int i = 0; i < 3; ++i) {
      std::string id = "c" + std::to_string(i);
      k.load_component("", id, "Client");
      if (rng() % 2) {
        k.bind_implicit({id, "svc"});
      } else {
        k.bind({id, "svc"}, {providers[rng() % providers.size()], "echo"});
      }
    }
    std::string victim = providers[rng() % providers.size()];
    k.unload(victim);
    for (const auto& b : k.bindings()) {
      EXPECT_NE(b.client.component, victim);
      EXPECT_NE(b.server.component, victim);
    }
    for (const auto& r : k.broker("", Style::kService, "Bytes")) EXPECT_NE(r.component, victim);
  }
}

// Independent compatibility oracle.
bool oracle_compatible(const InterfaceDescriptor& cl, const InterfaceDescriptor& sv) {
  if (cl.direction != Direction::kRequired || sv.direction != Direction::kProvided) return false;
  if (cl.style != sv.style || cl.payload_type != sv.payload_type) return false;
  if (cl.style == Style::kData && cl.flow != sv.flow) return false;
  return true;
}

TEST_F(ContainerTest, PropertyBindingSoundness) {
  c.load_component("", "cl1", "Client");
  c.load_component("", "cl2", "Client");
  c.load_component("", "q", "TestQueue");
  c.load_component("", "e", "EchoService");
  c.load_component("", "s", "Sink");
  std::vector<InterfaceRef> all;
  for (const auto& r : c.list_components("")) {
    for (const auto& d : r.interfaces) all.push_back({r.id, d.name});
  }
  auto descriptor = [&](const InterfaceRef& ref, Direction dir) -> std::optional<InterfaceDescriptor> {
    for (const auto& d : c.describe_interfaces(ref.component)) {
      if (d.name == ref.interface && d.direction == dir) return d;
    }
    return std::nullopt;
  };
  for (const auto& cl : all) {
    for (const auto& sv : all) {
      try {
        c.bind(cl, sv);
      } catch (const Error&) {
      }
    }
  }
  ASSERT_FALSE(c.bindings().empty());
  for (const auto& b : c.bindings()) {
    auto cd = descriptor(b.client, Direction::kRequired);
    auto sd = descriptor(b.server, Direction::kProvided);
    ASSERT_TRUE(cd && sd);
    EXPECT_TRUE(oracle_compatible(*cd, *sd)) << b.client.component << "." << b.client.interface;
  }
}

TEST_F(ContainerTest, UnloadCompositeRemovesChildrenFirst) {
  record_events();
  c.load_component("", "outer", "Composite");
  auto ctx = c.create_inner_context("outer");
  c.load_component(ctx, "q", "TestQueue");
  c.unload("outer");
  EXPECT_FALSE(c.contains("outer/q"));
  EXPECT_EQ(observed(events::kRemoved), (std::vector<std::string>{"outer/q", "outer"}));
}

}  // namespace
