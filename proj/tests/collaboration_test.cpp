#include <chrono>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "hybridrt/container.hpp"
#include "hybridrt/event.hpp"
#include "support/test_components.hpp"

using namespace hybridrt;
using namespace hybridrt::testing;

namespace {

HandlerRegistration handler(std::int64_t priority, HandlerOrigin origin, std::vector<int>* trace, int tag,
                            Disposition d = Disposition::kContinue, std::string source = kWildcard) {
  return {std::move(source), kWildcard, priority, origin, [=](const Event&) {
            trace->push_back(tag);
            return d;
          }};
}

Event consumable(std::string source = "src", std::string name = "ping") {
  Event e;
  e.source = std::move(source);
  e.name = std::move(name);
  e.consumable = true;
  return e;
}

TEST(EventBus, AgentConsumesBeforeFramework) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler(handler(0, HandlerOrigin::kFramework, &trace, 0));
  auto agent = bus.register_handler(handler(10, HandlerOrigin::kAgent, &trace, 10, Disposition::kConsume));
  auto report = bus.emit(consumable());
  EXPECT_EQ(trace, std::vector<int>{10});
  EXPECT_EQ(report.consumed_by, agent);
}

TEST(EventBus, BothInvokedWhenNobodyConsumes) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler(handler(0, HandlerOrigin::kFramework, &trace, 0));
  bus.register_handler(handler(10, HandlerOrigin::kFramework, &trace, 10));
  auto report = bus.emit(consumable());
  EXPECT_EQ(trace, (std::vector<int>{10, 0}));
  EXPECT_FALSE(report.consumed_by.has_value());
}

TEST(EventBus, EqualPriorityFollowsRegistrationOrder) {
  for (bool reversed : {false, true}) {
    EventBus bus;
    std::vector<int> trace;
    bus.register_handler(handler(5, HandlerOrigin::kFramework, &trace, reversed ? 2 : 1));
    bus.register_handler(handler(5, HandlerOrigin::kFramework, &trace, reversed ? 1 : 2));
    bus.emit(consumable());
    EXPECT_EQ(trace, reversed ? (std::vector<int>{2, 1}) : (std::vector<int>{1, 2}));
  }
}

TEST(EventBus, NonConsumableReachesEveryone) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler(handler(10, HandlerOrigin::kAgent, &trace, 1, Disposition::kConsume));
  bus.register_handler(handler(0, HandlerOrigin::kFramework, &trace, 2));
  Event e = consumable();
  e.consumable = false;
  auto report = bus.emit(e);
  EXPECT_EQ(trace, (std::vector<int>{1, 2}));
  EXPECT_FALSE(report.consumed_by.has_value());
}

TEST(EventBus, WildcardSourceAndDeregistration) {
  EventBus bus;
  std::vector<int> trace;
  auto id = bus.register_handler(handler(0, HandlerOrigin::kFramework, &trace, 1));
  bus.emit(consumable("a"));
  bus.emit(consumable("b"));
  EXPECT_TRUE(bus.deregister(id));
  bus.emit(consumable("a"));
  EXPECT_EQ(trace, (std::vector<int>{1, 1}));
}

TEST(EventBus, SourceAndNameFilters) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler({"a", "ping", 0, HandlerOrigin::kFramework, [&](const Event&) {
                          trace.push_back(1);
                          return Disposition::kContinue;
                        }});
  bus.emit(consumable("a", "ping"));
  bus.emit(consumable("a", "pong"));
  bus.emit(consumable("b", "ping"));
  EXPECT_EQ(trace, std::vector<int>{1});
}

TEST(EventBus, AgentZeroBeatsHugeFrameworkPriority) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler(handler(std::int64_t{1} << 62, HandlerOrigin::kFramework, &trace, 1));
  bus.register_handler(handler(0, HandlerOrigin::kAgent, &trace, 2));
  auto report = bus.emit(consumable());
  EXPECT_EQ(trace, (std::vector<int>{2, 1}));
  EXPECT_GT(report.priorities[0], report.priorities[1]);
  EXPECT_GT(effective_priority(std::numeric_limits<std::int64_t>::min(), HandlerOrigin::kAgent),
            effective_priority(std::numeric_limits<std::int64_t>::max(), HandlerOrigin::kFramework));
}

TEST(EventBus, HandlerExceptionDoesNotAbort) {
  EventBus bus;
  std::vector<int> trace;
  bus.register_handler({kWildcard, kWildcard, 5, HandlerOrigin::kFramework,
                        [](const Event&) -> Disposition { throw std::runtime_error("boom"); }});
  bus.register_handler(handler(0, HandlerOrigin::kFramework, &trace, 1));
  bus.emit(consumable());
  EXPECT_EQ(trace, std::vector<int>{1});
}

TEST(EventBus, SequenceIncreasesPerSource) {
  EventBus bus;
  auto a1 = bus.emit(consumable("a")).sequence;
  auto b1 = bus.emit(consumable("b")).sequence;
  auto a2 = bus.emit(consumable("a")).sequence;
  EXPECT_LT(a1, a2);
  EXPECT_EQ(b1, 1u);
  EXPECT_EQ(bus.last_sequence("a"), a2);
}

// Random handler sets: priorities non-increasing, invoked set is a prefix of
// the sorted matching list, and an agent consumer shuts out the framework.
TEST(EventBus, PropertyDispatchOrdering) {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 300; ++round) {
    EventBus bus;
    struct Spec {
      std::int64_t prio;
      HandlerOrigin origin;
      bool consumes;
      HandlerId id;
    };
    std::vector<Spec> specs;
    int n = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < n; ++i) {
      Spec s{static_cast<std::int64_t>(rng() % 7) - 3, rng() % 2 ? HandlerOrigin::kAgent : HandlerOrigin::kFramework,
             rng() % 4 == 0, 0};
      s.id = bus.register_handler({kWildcard, kWildcard, s.prio, s.origin, [consumes = s.consumes](const Event&) {
                                     return consumes ? Disposition::kConsume : Disposition::kContinue;
                                   }});
      specs.push_back(s);
    }
    auto report = bus.emit(consumable());

    // Oracle ordering: agents first, then by requested priority, stable.
    std::vector<Spec> sorted = specs;
    std::stable_sort(sorted.begin(), sorted.end(), [](const Spec& a, const Spec& b) {
      int ka = a.origin == HandlerOrigin::kAgent, kb = b.origin == HandlerOrigin::kAgent;
      if (ka != kb) return ka > kb;
      return a.prio > b.prio;
    });
    std::vector<HandlerId> expected;
    std::optional<HandlerId> consumer;
    for (const auto& s : sorted) {
      expected.push_back(s.id);
      if (s.consumes) {
        consumer = s.id;
        break;
      }
    }
    ASSERT_EQ(report.invoked, expected);
    ASSERT_EQ(report.consumed_by, consumer);
    ASSERT_TRUE(std::is_sorted(report.priorities.begin(), report.priorities.end(), std::greater<>()));
    if (consumer) {
      auto it = std::find_if(specs.begin(), specs.end(), [&](auto& s) { return s.id == *consumer; });
      if (it->origin == HandlerOrigin::kAgent) {
        for (auto id : report.invoked) {
          auto sp = std::find_if(specs.begin(), specs.end(), [&](auto& s) { return s.id == id; });
          ASSERT_EQ(sp->origin, HandlerOrigin::kAgent);
        }
      }
    }
  }
}

class CollaborationTest : public ::testing::Test {
 protected:
  void SetUp() override { register_test_types(c); }
  Container c;
};

TEST_F(CollaborationTest, ServiceEcho) {
  c.load_component("", "e", "EchoService");
  c.load_component("", "cl", "Client");
  c.set_lifecycle("e", LifecycleState::kActive);
  auto b = c.bind({"cl", "svc"}, {"e", "echo"});
  EXPECT_EQ(c.invoke_service(b, bytes({"x"})).items, std::vector<std::string>{"x"});
}

TEST_F(CollaborationTest, ServiceOnDeactivatedProvider) {
  c.load_component("", "e", "EchoService");
  c.load_component("", "cl", "Client");
  c.set_lifecycle("e", LifecycleState::kActive);
  c.set_lifecycle("e", LifecycleState::kDeactivated);
  auto b = c.bind({"cl", "svc"}, {"e", "echo"});
  try {
    c.invoke_service(b, bytes({"x"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProviderInactive);
  }
}

TEST_F(CollaborationTest, ServiceFaultCarriesText) {
  c.load_component("", "e", "EchoService", {{"fail", true}});
  c.load_component("", "cl", "Client");
  c.set_lifecycle("e", LifecycleState::kActive);
  c.bind({"cl", "svc"}, {"e", "echo"});
  try {
    c.component_as<Client>("cl")->svc->call(bytes({"x"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProviderFault);
    EXPECT_NE(std::string(e.what()).find("echo exploded"), std::string::npos);
  }
}

TEST_F(CollaborationTest, PullDrainsInOrder) {
  c.load_component("", "q", "TestQueue");
  c.load_component("", "cl", "Client");
  c.set_lifecycle("q", LifecycleState::kActive);
  c.component_as<TestQueue>("q")->seed({"b1", "b2", "b3"});
  auto b = c.bind({"cl", "source"}, {"q", "pull"});
  EXPECT_EQ(c.pull_data(b, 2).items, (std::vector<std::string>{"b1", "b2"}));
  EXPECT_EQ(c.pull_data(b, 2).items, (std::vector<std::string>{"b3"}));
  auto empty = c.pull_data(b, 2);
  EXPECT_EQ(empty.item_count(), 0u);
  EXPECT_EQ(serialize_items(empty), std::string(4, '\0'));
}

TEST_F(CollaborationTest, PullAfterUnloadWithoutSubstitute) {
  c.load_component("", "q", "TestQueue");
  c.load_component("", "cl", "Client");
  c.set_lifecycle("q", LifecycleState::kActive);
  auto b = c.bind({"cl", "source"}, {"q", "pull"});
  c.unload("q");
  try {
    c.component_as<Client>("cl")->source->pull(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProviderInactive);
  }
  EXPECT_THROW(c.pull_data(b, 1), Error);
}

TEST_F(CollaborationTest, MulticastDeliversIdenticalPayload) {
  c.load_component("", "cl", "Client");
  for (auto id : {"s1", "s2", "s3"}) {
    c.load_component("", id, "Sink");
    c.set_lifecycle(id, LifecycleState::kActive);
    c.bind({"cl", "out"}, {id, "in"});
  }
  DataEnvelope env{kBundle, {"alpha", std::string("\0\xff", 2)}};
  c.push_data({"cl", "out"}, env, SyncMode::kSync, Routing::kMulticast);
  for (auto id : {"s1", "s2", "s3"}) {
    auto got = c.component_as<Sink>(id)->received();
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(serialize_items(got[0]), serialize_items(env));
  }
}

TEST_F(CollaborationTest, AsyncPushEventuallyObserved) {
  c.load_component("", "cl", "Client");
  c.load_component("", "s", "Sink");
  c.set_lifecycle("s", LifecycleState::kActive);
  c.bind({"cl", "out"}, {"s", "in"});
  c.push_data({"cl", "out"}, DataEnvelope{kBundle, {"x"}}, SyncMode::kAsync, Routing::kUnicast);
  auto sink = c.component_as<Sink>("s");
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
  while (sink->item_count() == 0 && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
  EXPECT_EQ(sink->item_count(), 1u);
}

TEST_F(CollaborationTest, AsyncFifoPerPair) {
  c.load_component("", "cl", "Client");
  c.load_component("", "s", "Sink");
  c.set_lifecycle("s", LifecycleState::kActive);
  c.bind({"cl", "out"}, {"s", "in"});
  auto client = c.component_as<Client>("cl");
  for (int i = 0; i < 50; ++i) client->out->push(DataEnvelope{kBundle, {std::to_string(i)}}, SyncMode::kAsync);
  client->out->flush_async();
  auto got = c.component_as<Sink>("s")->received();
  ASSERT_EQ(got.size(), 50u);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(got[i].items[0], std::to_string(i));
}

TEST_F(CollaborationTest, UnicastWithoutBinding) {
  c.load_component("", "cl", "Client");
  try {
    c.push_data({"cl", "out"}, DataEnvelope{kBundle, {"x"}}, SyncMode::kSync, Routing::kUnicast);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNoBinding);
  }
}

TEST_F(CollaborationTest, SyncPushToInactiveProvider) {
  c.load_component("", "cl", "Client");
  c.load_component("", "s", "Sink");
  c.bind({"cl", "out"}, {"s", "in"});
  try {
    c.push_data({"cl", "out"}, DataEnvelope{kBundle, {"x"}}, SyncMode::kSync, Routing::kUnicast);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kProviderInactive);
  }
}

TEST_F(CollaborationTest, PropertyNoLossUnderConcurrentSyncPush) {
  c.load_component("", "s", "Sink");
  c.set_lifecycle("s", LifecycleState::kActive);
  std::vector<std::shared_ptr<Client>> clients;
  for (int i = 0; i < 4; ++i) {
    std::string id = "cl" + std::to_string(i);
    c.load_component("", id, "Client");
    c.bind({id, "out"}, {"s", "in"});
    clients.push_back(c.component_as<Client>(id));
  }
  std::size_t pushed = 0;
  std::vector<std::thread> threads;
  std::mt19937 rng(5);
  std::vector<int> counts;
  for (int i = 0; i < 4; ++i) counts.push_back(20 + static_cast<int>(rng() % 30));
  for (int i = 0; i < 4; ++i) {
    pushed += static_cast<std::size_t>(counts[i]) * 2;
    threads.emplace_back([&, i] {
      for (int k = 0; k < counts[i]; ++k) clients[i]->out->push(DataEnvelope{kBundle, {"a", "b"}});
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(c.component_as<Sink>("s")->item_count(), pushed);
}

}  // namespace
