#include <algorithm>
#include <chrono>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <thread>

#include <gtest/gtest.h>

#include "hybridrt/agent/agent.hpp"
#include "hybridrt/agent/transport.hpp"
#include "support/test_components.hpp"

using namespace hybridrt;
using namespace hybridrt::agent;
using namespace hybridrt::testing;

namespace {

Term T(std::string_view text) { return parse_term(text); }

TEST(TermSyntax, ParseAndRender) {
  EXPECT_EQ(T("activated(c1)").to_string(), "activated(c1)");
  EXPECT_EQ(T("event(q1, queue_grew(5))").arg(1).arg(0).text(), "5");
  EXPECT_TRUE(T("p(?x)").arg(0).is_variable());
  EXPECT_FALSE(T("p(?x)").is_ground());
  EXPECT_EQ(T("p()"), c("p"));
  EXPECT_EQ(T("s(\"a b\\n\\x01\")").arg(0).text(), std::string("a b\n\x01"));
  EXPECT_EQ(atom("s", std::string("a\"b\x02")).to_string(), "s(\"a\\\"b\\x02\")");
  EXPECT_THROW(T("p(a"), Error);
  EXPECT_THROW(T("p(a) x"), Error);
  EXPECT_THROW(T("\"open"), Error);
}

TEST(TermSyntax, PropertyRenderParseRoundTrip) {
  std::mt19937 rng(3);
  std::function<Term(int)> gen = [&](int depth) -> Term {
    int k = static_cast<int>(rng() % 3);
    if (depth == 0 || k == 0) {
      std::string s;
      std::size_t n = 1 + rng() % 6;
      for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>(rng() % 256));
      return c(s);
    }
    if (k == 1) return v("v" + std::to_string(rng() % 5));
    std::vector<Term> args;
    std::size_t n = 1 + rng() % 3;
    for (std::size_t i = 0; i < n; ++i) args.push_back(gen(depth - 1));
    return Term::compound("f" + std::to_string(rng() % 3), std::move(args));
  };
  for (int i = 0; i < 2000; ++i) {
    Term t = gen(3);
    ASSERT_EQ(parse_term(t.to_string()), t) << t.to_string();
  }
}

TEST(Beliefs, SetSemantics) {
  BeliefStore b;
  EXPECT_TRUE(b.add(T("activated(c1)")));
  EXPECT_FALSE(b.add(T("activated(c1)")));
  EXPECT_EQ(b.size(), 1u);
}

TEST(Beliefs, RetractPattern) {
  BeliefStore b;
  b.add(T("property(c1, a, 1)"));
  b.add(T("property(c1, b, 2)"));
  b.add(T("property(c2, a, 1)"));
  EXPECT_EQ(b.retract(T("property(c1, ?p, ?v)")), 2u);
  EXPECT_EQ(b.atoms(), std::vector<Term>{T("property(c2, a, 1)")});
}

TEST(Beliefs, NonGroundAssert) {
  BeliefStore b;
  try {
    b.add(T("activated(?x)"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kNonGroundAssert);
  }
}

TEST(Beliefs, QueryBindings) {
  BeliefStore b;
  b.add(T("event(c1, \"done\")"));
  b.add(T("event(c2, \"done\")"));
  auto r = b.query(T("event(?c, \"done\")"));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].at("c"), c("c1"));
  EXPECT_EQ(r[1].at("c"), c("c2"));
  auto ground = b.query(T("event(c1, \"done\")"));
  ASSERT_EQ(ground.size(), 1u);
  EXPECT_TRUE(ground[0].empty());
  EXPECT_TRUE(b.holds(c("true")));
}

// Brute force oracle: try every assignment of the query's variables over the
// constant universe and keep those whose instance is believed.
std::set<Substitution> brute_force(const BeliefStore& b, const Term& q, const std::vector<std::string>& universe) {
  std::set<std::string> names;
  std::function<void(const Term&)> collect = [&](const Term& t) {
    if (t.is_variable()) names.insert(t.text());
    for (const auto& a : t.args()) collect(a);
  };
  collect(q);
  std::vector<std::string> vars(names.begin(), names.end());
  std::set<Substitution> out;
  std::vector<std::size_t> idx(vars.size(), 0);
  for (;;) {
    Substitution s;
    for (std::size_t i = 0; i < vars.size(); ++i) s[vars[i]] = c(universe[idx[i]]);
    if (b.contains(substitute(q, s))) out.insert(s);
    std::size_t k = 0;
    while (k < idx.size() && ++idx[k] == universe.size()) idx[k++] = 0;
    if (k == idx.size()) break;
  }
  return out;
}

TEST(Beliefs, PropertyMatcherAgainstBruteForce) {
  const std::vector<std::string> universe{"a", "b", "c"};
  std::mt19937 rng(42);
  auto random_const = [&] { return c(universe[rng() % universe.size()]); };
  for (int round = 0; round < 300; ++round) {
    BeliefStore b;
    for (int i = 0; i < 8; ++i) {
      std::size_t arity = 1 + rng() % 3;
      std::vector<Term> args;
      for (std::size_t k = 0; k < arity; ++k) args.push_back(random_const());
      b.add(Term::compound(rng() % 2 ? "p" : "q", args));
    }
    std::size_t arity = 1 + rng() % 3;
    std::vector<Term> args;
    for (std::size_t k = 0; k < arity; ++k) {
      args.push_back(rng() % 2 ? random_const() : v("x" + std::to_string(rng() % 2)));
    }
    Term q = Term::compound(rng() % 2 ? "p" : "q", args);
    auto got = b.query(q);
    std::set<Substitution> got_set(got.begin(), got.end());
    ASSERT_EQ(got.size(), got_set.size()) << "duplicate answers for " << q.to_string();
    ASSERT_EQ(got_set, brute_force(b, q, universe)) << q.to_string();
  }
}

TEST(Beliefs, ArityMismatchHasNoMatches) {
  BeliefStore b;
  b.add(T("p(a, b)"));
  EXPECT_TRUE(b.query(T("p(?x)")).empty());
  EXPECT_TRUE(b.query(T("p(?x, ?y, ?z)")).empty());
}

class AgentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    register_test_types(container);
    agent = std::make_unique<Agent>("a1", &container);
  }
  Container container;
  std::unique_ptr<Agent> agent;
};

TEST_F(AgentTest, CreateAssertsCreatedAndComponent) {
  auto out = agent->execute(Directive::parse("create(g1, Client)"));
  EXPECT_TRUE(agent->believes(T("created(g1)")));
  EXPECT_TRUE(agent->believes(T("component(g1)")));
  EXPECT_EQ(out.size(), 2u);
  EXPECT_TRUE(container.contains("g1"));
}

TEST_F(AgentTest, IncompatibleBindFailsWithoutBelief) {
  agent->execute(Directive::parse("create(g1, Client)"));
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  try {
    agent->execute(Directive::parse("bind(g1, svc, q1, pull)"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kActionFailed);
  }
  EXPECT_FALSE(agent->believes(T("bound(?a, ?b)")));
}

TEST_F(AgentTest, LookupMatchesDescribeInterfaces) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("lookup(q1)"));
  EXPECT_TRUE(agent->believes(T("serverInterface(q1, pull, DATA, DocumentBundle)")));
  for (const auto& d : container.describe_interfaces("q1")) {
    auto q = atom("serverInterface", "q1", d.name, std::string(hybridrt::to_string(d.style)), d.payload_type);
    EXPECT_TRUE(agent->believes(q)) << q.to_string();
  }
}

TEST_F(AgentTest, LookupClientInterfaceBoundFlag) {
  agent->execute(Directive::parse("create(g1, Client)"));
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("bind(g1, source, q1, pull)"));
  agent->execute(Directive::parse("lookup(g1)"));
  EXPECT_TRUE(agent->believes(T("clientInterface(g1, source, DATA, DocumentBundle, true)")));
  EXPECT_TRUE(agent->believes(T("clientInterface(g1, svc, SERVICE, Bytes, false)")));
}

TEST_F(AgentTest, LookupByRequirementBrokers) {
  agent->execute(Directive::parse("create(e1, EchoService)"));
  agent->execute(Directive::parse("lookup(SERVICE, Bytes)"));
  EXPECT_TRUE(agent->believes(T("serverInterface(e1, echo, SERVICE, Bytes)")));
}

TEST_F(AgentTest, DirectiveOntologyCorrespondence) {
  struct Case {
    std::string directive;
    std::string belief;
    bool ok;
  };
  std::vector<Case> cases{
      {"create(g1, Client)", "created(g1)", true},
      {"create(g1, Client)", "", false},
      {"create(q1, TestQueue)", "created(q1)", true},
      {"bind(g1, source, q1, pull)", "bound(interface(g1, source), interface(q1, pull))", true},
      {"configure(g1, port, 8)", "property(g1, port, 8)", true},
      {"configure(g1, port, -1)", "property(g1, port, -1)", false},
      {"activate(q1)", "activated(q1)", true},
      {"deactivate(q1)", "deactivated(q1)", true},
      {"deactivate(g1)", "deactivated(g1)", false},
      {"focus(q1)", "focusingOn(q1, TestQueue)", true},
      {"focus(ghost)", "focusingOn(ghost, ?t)", false},
      {"remove(g1)", "removed(g1)", true},
      {"activate(g1)", "activated(g1)", false},
  };
  for (const auto& k : cases) {
    bool ok = true;
    try {
      agent->execute(Directive::parse(k.directive));
    } catch (const Error& e) {
      ok = false;
      EXPECT_EQ(e.code(), Errc::kActionFailed);
    }
    EXPECT_EQ(ok, k.ok) << k.directive;
    if (!k.belief.empty()) EXPECT_EQ(agent->believes(T(k.belief)), k.ok) << k.directive;
  }
  EXPECT_FALSE(agent->believes(T("created(g1)")));
  EXPECT_FALSE(agent->believes(T("activated(q1)")));
}

TEST_F(AgentTest, PerceiveFocusedEvent) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("focus(q1)"));
  container.emit_event("q1", Event{"q1", "queue_grew", {{"length", std::int64_t{5}}}});
  auto added = agent->perceive();
  EXPECT_EQ(added, std::vector<Term>{T("event(q1, queue_grew(5))")});
}

TEST_F(AgentTest, UnfocusedComponentProducesNothing) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  container.configure("q1", "capacity", std::int64_t{3});
  container.emit_event("q1", Event{"q1", "queue_grew", {}});
  EXPECT_TRUE(agent->perceive().empty());
  EXPECT_FALSE(agent->believes(T("property(q1, ?k, ?v)")));
}

TEST_F(AgentTest, PerceivedLifecycleStaysExclusive) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("focus(q1)"));
  container.set_lifecycle("q1", LifecycleState::kActive);
  agent->perceive();
  EXPECT_TRUE(agent->believes(T("activated(q1)")));
  container.set_lifecycle("q1", LifecycleState::kDeactivated);
  agent->perceive();
  EXPECT_TRUE(agent->believes(T("deactivated(q1)")));
  EXPECT_FALSE(agent->believes(T("activated(q1)")));
}

TEST_F(AgentTest, PropertyBeliefsAreLastWriteWins) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("focus(q1)"));
  container.configure("q1", "capacity", std::int64_t{3});
  container.configure("q1", "capacity", std::int64_t{9});
  agent->perceive();
  auto r = agent->query(T("property(q1, capacity, ?v)"));
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].at("v"), c("9"));
}

TEST_F(AgentTest, PropertyPerceptorSoundAndComplete) {
  std::mt19937 rng(17);
  for (auto id : {"q1", "q2", "q3"}) agent->execute(Directive::parse(std::string("create(") + id + ", TestQueue)"));
  agent->execute(Directive::parse("focus(q1)"));
  agent->execute(Directive::parse("focus(q2)"));
  std::set<Term> emitted_focused;
  for (int i = 0; i < 200; ++i) {
    std::string src = "q" + std::to_string(1 + rng() % 3);
    std::int64_t n = static_cast<std::int64_t>(rng() % 1000);
    container.emit_event(src, Event{src, "tick", {{"n", n}}});
    if (src != "q3") emitted_focused.insert(atom("event", src, atom("tick", std::to_string(n))));
    if (rng() % 5 == 0) {
      agent->cycle();
      // Completeness: every focused event so far is believed after one cycle.
      for (const auto& t : emitted_focused) ASSERT_TRUE(agent->believes(t)) << t.to_string();
    }
  }
  agent->cycle();
  // Soundness: each event belief matches something actually emitted while focused.
  for (const auto& s : agent->query(T("event(?c, ?d)"))) {
    EXPECT_TRUE(emitted_focused.count(atom("event", s.at("c"), s.at("d"))));
  }
}

TEST_F(AgentTest, RemovedComponentClearsLifecycleBeliefs) {
  agent->execute(Directive::parse("create(q1, TestQueue)"));
  agent->execute(Directive::parse("focus(q1)"));
  container.set_lifecycle("q1", LifecycleState::kActive);
  container.unload("q1");
  agent->perceive();
  EXPECT_TRUE(agent->believes(T("removed(q1)")));
  EXPECT_FALSE(agent->believes(T("activated(q1)")));
  EXPECT_FALSE(agent->believes(T("focusingOn(q1, ?t)")));
  EXPECT_TRUE(agent->focused().empty());
}

class PlanTest : public AgentTest {
 protected:
  void SetUp() override {
    AgentTest::SetUp();
    agent->register_action("mark", [this](Agent&, const std::vector<Term>& args) {
      marks.push_back(args.at(0).text());
      return ActionStatus::kDone;
    });
    agent->register_action("boom", [](Agent&, const std::vector<Term>&) -> ActionStatus {
      throw std::runtime_error("boom");
    });
    agent->register_action("wait", [this](Agent&, const std::vector<Term>& args) {
      auto& left = waits[args.at(0).text()];
      if (left == 0) left = std::stoi(args.at(1).text());
      if (--left > 0) return ActionStatus::kPending;
      marks.push_back(args.at(0).text());
      return ActionStatus::kDone;
    });
  }
  std::vector<std::string> marks;
  std::map<std::string, int> waits;
};

TEST_F(PlanTest, SeqAbortsOnFailure) {
  try {
    run_plan(*agent, PlanNode::seq({PlanNode::act("boom(a)"), PlanNode::act("mark(b)")}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kPlanFailed);
    EXPECT_NE(std::string(e.what()).find("boom(a)"), std::string::npos);
  }
  EXPECT_TRUE(marks.empty());
}

TEST_F(PlanTest, ParFailsAfterAllSettle) {
  PlanId id = agent->adopt(PlanNode::par({PlanNode::act("boom(x)"), PlanNode::act("wait(w, 3)")}));
  for (int i = 0; i < 5; ++i) agent->cycle();
  auto report = agent->plan_report(id);
  EXPECT_EQ(report.status, PlanStatus::kFailed);
  EXPECT_EQ(report.failed_leaf, "boom(x)");
  EXPECT_EQ(marks, std::vector<std::string>{"w"});
}

TEST_F(PlanTest, DoWhenNeverTriggeredStaysPending) {
  auto report = run_plan(*agent, PlanNode::do_when(T("ready(?x)"), PlanNode::act("create(?x, Client)")), 20);
  EXPECT_EQ(report.status, PlanStatus::kPending);
  EXPECT_TRUE(container.list_components("").empty());
  EXPECT_TRUE(agent->action_log().empty());
}

TEST_F(PlanTest, DoWhenStartsOnTriggerCycle) {
  PlanId id = agent->adopt(PlanNode::do_when(T("go(?x)"), PlanNode::act("mark(?x)")));
  for (int i = 0; i < 3; ++i) agent->cycle();
  EXPECT_TRUE(marks.empty());
  agent->assert_belief(T("go(now)"));
  agent->cycle();
  EXPECT_EQ(marks, std::vector<std::string>{"now"});
  EXPECT_EQ(agent->plan_report(id).finished_cycle, 4u);
}

TEST_F(PlanTest, FigureSixPlan) {
  agent->register_action("specifyDataQueue", [](Agent& a, const std::vector<Term>& args) {
    a.assert_belief(atom("dataQueueName", args.at(0).text() + "_queue"));
    return ActionStatus::kDone;
  });
  agent->commit(c("true"),
                PlanNode::par({
                    PlanNode::act("create(g1, Client)"),
                    PlanNode::act("specifyDataQueue(g1)"),
                    PlanNode::do_when(T("dataQueueName(?qName)"),
                                      PlanNode::seq({PlanNode::act("create(?qName, TestQueue)"),
                                                     PlanNode::par({PlanNode::act("bind(g1, out, ?qName, input)"),
                                                                    PlanNode::act("focus(g1)"),
                                                                    PlanNode::act("focus(?qName)")})})),
                }));
  for (int i = 0; i < 5; ++i) agent->cycle();
  EXPECT_EQ(agent->pending_plans(), 0u);
  EXPECT_TRUE(agent->believes(T("bound(interface(g1, out), interface(g1_queue, input))")));
  EXPECT_TRUE(agent->believes(T("focusingOn(g1, Client)")));
  EXPECT_TRUE(agent->believes(T("focusingOn(g1_queue, TestQueue)")));
  EXPECT_EQ(container.bindings().size(), 1u);
}

// Random SEQ/PAR trees over mark/wait leaves: SEQ children finish in order,
// PAR completes every branch whatever order branches are advanced in.
TEST_F(PlanTest, PropertyPlanAlgebra) {
  std::mt19937 rng(555);
  int leaf = 0;
  std::function<PlanNode(int, std::vector<std::vector<std::string>>&)> gen =
      [&](int depth, std::vector<std::vector<std::string>>& seq_groups) -> PlanNode {
    if (depth == 0 || rng() % 3 == 0) {
      std::string name = "l" + std::to_string(leaf++);
      if (rng() % 2) return PlanNode::act(Directive{"wait", {c(name), c(std::to_string(1 + rng() % 3))}});
      return PlanNode::act(Directive{"mark", {c(name)}});
    }
    std::size_t n = 2 + rng() % 2;
    std::vector<PlanNode> kids;
    for (std::size_t i = 0; i < n; ++i) kids.push_back(gen(depth - 1, seq_groups));
    bool is_seq = rng() % 2;
    if (is_seq) {
      std::vector<std::string> order;
      for (const auto& k : kids) {
        if (k.op == PlanOp::kAct) order.push_back(k.action->args[0].text());
      }
      seq_groups.push_back(order);
      return PlanNode::seq(std::move(kids));
    }
    return PlanNode::par(std::move(kids));
  };
  for (int round = 0; round < 100; ++round) {
    Agent a("p" + std::to_string(round), &container);
    std::vector<std::string> log;
    std::map<std::string, int> left;
    a.register_action("mark", [&](Agent&, const std::vector<Term>& args) {
      log.push_back(args[0].text());
      return ActionStatus::kDone;
    });
    a.register_action("wait", [&](Agent&, const std::vector<Term>& args) {
      auto& l = left[args[0].text()];
      if (l == 0) l = std::stoi(args[1].text()) + 1;
      if (--l > 0) return ActionStatus::kPending;
      log.push_back(args[0].text());
      return ActionStatus::kDone;
    });
    std::mt19937 order_rng(round);
    a.set_par_order([&](std::size_t n, std::uint64_t) {
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), order_rng);
      return idx;
    });
    leaf = 0;
    std::vector<std::vector<std::string>> seq_groups;
    PlanNode plan = gen(3, seq_groups);
    auto report = run_plan(a, plan, 200);
    ASSERT_EQ(report.status, PlanStatus::kSucceeded);
    ASSERT_EQ(log.size(), static_cast<std::size_t>(leaf));
    ASSERT_EQ(std::set<std::string>(log.begin(), log.end()).size(), log.size());
    for (const auto& group : seq_groups) {
      std::size_t last = 0;
      for (const auto& name : group) {
        auto pos = static_cast<std::size_t>(std::find(log.begin(), log.end(), name) - log.begin());
        ASSERT_GE(pos, last);
        last = pos;
      }
    }
  }
}

TEST(Acl, EncodeDecodeRoundTrip) {
  std::mt19937 rng(9);
  for (int i = 0; i < 500; ++i) {
    AclMessage m;
    m.performative = static_cast<Performative>(1 + rng() % 4);
    m.sender = "g" + std::to_string(rng() % 9) + "@n1";
    m.receiver = rng() % 3 ? "t1@n2" : kBroadcast;
    m.conversation_id = std::to_string(rng());
    if (rng() % 2) {
      m.content = atom("advert", m.sender, std::to_string(rng() % 100));
    } else {
      std::string blob(rng() % 64, '\0');
      for (auto& ch : blob) ch = static_cast<char>(rng());
      m.content = Opaque{blob};
    }
    ASSERT_EQ(decode_acl(encode_acl(m)), m);
  }
  EXPECT_THROW(decode_acl(std::string("\x07", 1)), Error);
  Bytes wire = encode_acl(AclMessage{Performative::kInform, "a", "b", "c", c("x")});
  EXPECT_EQ(wire, std::string("\x01\0\0\0\x01" "a\0\0\0\x01" "b\0\0\0\x01" "c\0\0\0\x02" "Ax", 22));
}

struct Inbox {
  std::mutex mu;
  std::vector<AclMessage> got;
  MessageTransport::Deliver sink() {
    return [this](AclMessage m) {
      std::lock_guard lock(mu);
      got.push_back(std::move(m));
    };
  }
  std::size_t size() {
    std::lock_guard lock(mu);
    return got.size();
  }
};

TEST(Transport, BroadcastSkipsSender) {
  MessageTransport t("n1");
  Inbox g1, t1, t2;
  t.register_agent("g1@n1", g1.sink());
  t.register_agent("t1@n1", t1.sink());
  t.register_agent("t2@n1", t2.sink());
  t.send({Performative::kInform, "g1@n1", kBroadcast, "ads", T("advert(g1, 4)")});
  EXPECT_EQ(g1.size(), 0u);
  EXPECT_EQ(t1.size(), 1u);
  EXPECT_EQ(t2.size(), 1u);
  EXPECT_EQ(t.messages_sent(), 1u);
}

TEST(Transport, UnknownReceiver) {
  MessageTransport t("n1");
  try {
    t.send({Performative::kRequest, "g1@n1", "nobody@n1", "x", c("hi")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kUnknownReceiver);
  }
  EXPECT_THROW(t.send({Performative::kRequest, "g1@n1", "x@n9", "x", c("hi")}), Error);
}

TEST(Transport, FifoPerPair) {
  MessageTransport t("n1");
  Inbox t1;
  t.register_agent("t1@n1", t1.sink());
  t.send({Performative::kInform, "g1@n1", "t1@n1", "c", c("first")});
  t.send({Performative::kInform, "g1@n1", "t1@n1", "c", c("second")});
  ASSERT_EQ(t1.size(), 2u);
  EXPECT_EQ(*t1.got[0].atom(), c("first"));
  EXPECT_EQ(*t1.got[1].atom(), c("second"));
}

TEST(Transport, CountersExcludeControlAndSumPerAgent) {
  MessageTransport t("n1");
  Inbox a, b;
  t.register_agent("a@n1", a.sink());
  t.register_agent("b@n1", b.sink());
  t.send({Performative::kInform, "a@n1", "b@n1", "x", c("1")});
  t.send({Performative::kInform, "b@n1", "a@n1", "x", c("2")});
  t.send({Performative::kInform, "b@n1", kBroadcast, "x", c("3")});
  t.send({Performative::kInform, "a@n1", "b@n1", MessageTransport::kControlConversation, c("stop")});
  EXPECT_EQ(t.messages_sent(), 3u);
  std::uint64_t sum = 0;
  for (const auto& [_, n] : t.sent_by_agent()) sum += n;
  EXPECT_EQ(sum, t.messages_sent());
  EXPECT_EQ(t.lifecycle_messages(), 0u);
  t.send({Performative::kInform, "a@n1", "b@n1", "x", T("channel_active(q1)")});
  EXPECT_EQ(t.lifecycle_messages(), 1u);
}

TEST(Transport, SocketBetweenNodes) {
  MessageTransport n1("n1"), n2("n2");
  auto p1 = n1.listen({"127.0.0.1", 0});
  auto p2 = n2.listen({"127.0.0.1", 0});
  n1.add_peer("n2", {"127.0.0.1", p2});
  n2.add_peer("n1", {"127.0.0.1", p1});
  Inbox g1, t1, t2;
  n1.register_agent("g1@n1", g1.sink());
  n2.register_agent("t1@n2", t1.sink());
  n2.register_agent("t2@n2", t2.sink());
  for (int i = 0; i < 20; ++i) n1.send({Performative::kInform, "g1@n1", "t1@n2", "c", c(std::to_string(i))});
  n1.send({Performative::kInform, "g1@n1", kBroadcast, "ads", T("advert(g1, 3)")});
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(3);
  while ((t1.size() < 21 || t2.size() < 1) && std::chrono::steady_clock::now() < deadline) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  ASSERT_EQ(t1.size(), 21u);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(*t1.got[i].atom(), c(std::to_string(i)));
  EXPECT_EQ(t2.size(), 1u);
  EXPECT_EQ(g1.size(), 0u);
}

TEST(Transport, DeadPeerIsTransportDown) {
  MessageTransport n1("n1");
  auto l = backchannel::Listener::open({"127.0.0.1", 0});
  auto port = l.port();
  l.close();
  n1.add_peer("n2", {"127.0.0.1", port});
  try {
    n1.send({Performative::kInform, "g1@n1", "t1@n2", "c", c("x")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kTransportDown);
  }
}

TEST(AgentMessaging, MailboxDeliveredInCycle) {
  MessageTransport t("n1");
  Agent a("a@n1", nullptr, &t), b("b@n1", nullptr, &t);
  a.send({Performative::kRequest, "", "b@n1", "conv", T("need(docs)")});
  EXPECT_EQ(b.mailbox_size(), 1u);
  EXPECT_FALSE(b.believes(T("message(?p, ?s, ?c)")));
  b.cycle();
  EXPECT_TRUE(b.believes(T("message(REQUEST, a@n1, need(docs))")));
  EXPECT_EQ(a.messages_sent(), 1u);
}

TEST(AgentMessaging, HandlerSeesMessagesInOrder) {
  MessageTransport t("n1");
  Agent a("a@n1", nullptr, &t), b("b@n1", nullptr, &t);
  std::vector<std::string> seen;
  b.set_message_handler([&](Agent&, const AclMessage& m) {
    seen.push_back(m.atom()->text());
    return true;
  });
  for (auto s : {"x", "y", "z"}) a.send({Performative::kInform, "", "b@n1", "c", c(s)});
  b.cycle();
  EXPECT_EQ(seen, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_FALSE(b.believes(T("message(?p, ?s, ?c)")));
}

}  // namespace
