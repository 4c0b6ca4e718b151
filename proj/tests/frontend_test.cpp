#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "deepdfa/cfg_json.hpp"
#include "deepdfa/error.hpp"
#include "deepdfa/minic.hpp"
#include "support.hpp"

namespace deepdfa {
namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const char* const kNullDeref = R"(void f(int argc) {
  char *str = NULL;
  if (argc > 1) {
    str = malloc(10 * argc);
  }
  str[(10 * argc)-1];
})";

TEST(Parse, NullDerefExampleHasFourStatementsAndDiamondEdges) {
  const Cfg cfg = parse_function(kNullDeref);
  ASSERT_EQ(cfg.size(), 6u);
  EXPECT_EQ(cfg.entry, 0u);
  EXPECT_EQ(cfg.exit, 5u);
  EXPECT_EQ(cfg.function, "f");
  EXPECT_EQ(cfg.nodes[1].kind, StatementKind::DeclInit);
  EXPECT_EQ(cfg.nodes[2].kind, StatementKind::Condition);
  EXPECT_EQ(cfg.nodes[3].kind, StatementKind::CallAssign);
  EXPECT_EQ(cfg.nodes[4].kind, StatementKind::DerefUse);
  const std::vector<Edge> expected{{0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 4}, {4, 5}};
  EXPECT_EQ(cfg.edges, expected);
}

TEST(Parse, BranchSuccessorsAreThenFirst) {
  const Cfg cfg = parse_function(kNullDeref);
  EXPECT_EQ(cfg.successors()[2], (std::vector<NodeId>{3, 4}));
}

TEST(Parse, StatementFactsAreVerbatim) {
  const Cfg cfg = parse_function(kNullDeref);
  const Statement& decl = cfg.nodes[1];
  EXPECT_EQ(decl.target, "str");
  EXPECT_EQ(decl.type, "char*");
  EXPECT_EQ(decl.constants, std::vector<std::string>{"NULL"});
  EXPECT_TRUE(decl.operators.empty());

  const Statement& alloc = cfg.nodes[3];
  EXPECT_EQ(alloc.target, "str");
  EXPECT_EQ(alloc.type, "char*");
  EXPECT_EQ(alloc.callee, "malloc");
  EXPECT_EQ(alloc.constants, std::vector<std::string>{"10"});
  EXPECT_EQ(alloc.operators, std::vector<std::string>{"*"});
  EXPECT_EQ(alloc.uses, std::vector<std::string>{"argc"});

  const Statement& deref = cfg.nodes[4];
  EXPECT_FALSE(deref.target.has_value());
  EXPECT_EQ(deref.uses, (std::vector<std::string>{"argc", "str"}));
}

TEST(Parse, AnonymousDerefDefinitionIsOptIn) {
  ParseOptions opts;
  opts.anonymous_deref_defs = true;
  const Cfg cfg = parse_function(kNullDeref, opts);
  ASSERT_TRUE(cfg.nodes[4].target.has_value());
  EXPECT_EQ(cfg.nodes[4].target->rfind(kAnonymousPrefix, 0), 0u);
  EXPECT_EQ(cfg.nodes[4].kind, StatementKind::DerefUse);
}

TEST(Parse, EmptyBodyConnectsEntryToExit) {
  const Cfg cfg = parse_function("void f() {}");
  ASSERT_EQ(cfg.size(), 2u);
  EXPECT_EQ(cfg.edges, (std::vector<Edge>{{0, 1}}));
}

TEST(Parse, WhileLoopMatchesGoldenGraph) {
  const Cfg parsed = parse_function(read_text(testing::data_path("while_loop.c")));
  const Cfg golden = read_cfg_file(testing::data_path("while_loop.json"));
  EXPECT_EQ(parsed, golden);
  EXPECT_EQ(dump_cfg(parsed), read_text(testing::data_path("while_loop.json")));
}

TEST(Parse, ElseBranchesJoin) {
  const Cfg cfg = parse_function("int f(int a) { int x = 0; if (a) { x = 1; } else { x = 2; } return x; }");
  // entry, decl, cond, then, else, return, exit
  ASSERT_EQ(cfg.size(), 7u);
  EXPECT_EQ(cfg.successors()[2], (std::vector<NodeId>{3, 4}));
  EXPECT_EQ(cfg.successors()[3], std::vector<NodeId>{5});
  EXPECT_EQ(cfg.successors()[4], std::vector<NodeId>{5});
  EXPECT_EQ(cfg.nodes[5].kind, StatementKind::Return);
}

TEST(Parse, IsDeterministic) {
  EXPECT_EQ(parse_function(kNullDeref), parse_function(kNullDeref));
}

TEST(Parse, TypeComesFromScope) {
  // A declaration without initializer defines nothing and gets no node.
  const Cfg cfg = parse_function("void f(int b) { int x; x = b + 2; }");
  ASSERT_EQ(cfg.size(), 3u);
  EXPECT_EQ(cfg.nodes[1].type, "int");
  EXPECT_EQ(cfg.nodes[1].operators, std::vector<std::string>{"+"});
}

TEST(ParseErrors, SyntaxErrorCarriesPosition) {
  try {
    parse_function("void f() {\n  int x = ;\n}");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_GT(e.column(), 1u);
  }
}

TEST(ParseErrors, UnsupportedConstructsAreNamed) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"void f() { for (;;) {} }", "for"},
      {"void f() { int a; int b; a = b = 1; }", "multiple definitions"},
      {"void f() { int a = 1, b = 2; }", "multiple"},
      {"void f() { int a = 0; a += 1; }", "+="},
      {"void f() { int a = 0; a++; }", "increment"},
      {"#include <x.h>\nvoid f() {}", "preprocessor"},
  };
  for (const auto& [src, construct] : cases) {
    try {
      parse_function(src);
      ADD_FAILURE() << "accepted: " << src;
    } catch (const UnsupportedError& e) {
      EXPECT_NE(std::string(e.what()).find(construct), std::string::npos) << e.what();
    }
  }
}

TEST(ParseErrors, UnreachableCodeIsRejected) {
  EXPECT_THROW(parse_function("int f() { return 1; return 2; }"), UnsupportedError);
}

TEST(CfgJson, NullDerefExampleRoundTrips) {
  const Cfg cfg = parse_function(kNullDeref);
  const std::string doc = dump_cfg(cfg);
  EXPECT_EQ(load_cfg(doc), cfg);
  EXPECT_EQ(dump_cfg(load_cfg(doc)), doc);
}

TEST(CfgJson, DanglingEdgeIsRejected) {
  auto doc = cfg_to_json(parse_function("void f() {}"));
  doc["edges"].push_back({0, 99});
  try {
    load_cfg(doc.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("dangling"), std::string::npos) << e.what();
  }
}

TEST(CfgJson, SchemaViolationNamesFieldPath) {
  auto doc = cfg_to_json(parse_function(kNullDeref));
  doc["nodes"][2]["kind"] = "branch";
  try {
    load_cfg(doc.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("$.nodes[2].kind"), std::string::npos) << e.what();
  }
}

TEST(CfgJson, LoadCanonicalizesEdgeOrder) {
  auto doc = cfg_to_json(parse_function(kNullDeref));
  auto edges = doc["edges"];
  std::reverse(edges.begin(), edges.end());
  doc["edges"] = edges;
  EXPECT_EQ(load_cfg(doc.dump()), parse_function(kNullDeref));
}

TEST(CfgJson, RandomGraphsRoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Cfg cfg = testing::random_cfg(rng);
    ASSERT_NO_THROW(validate(cfg));
    const std::string doc = dump_cfg(cfg);
    const Cfg back = load_cfg(doc);
    ASSERT_EQ(back, cfg) << doc;
    ASSERT_EQ(dump_cfg(back), doc);
  }
}

TEST(CfgValidate, UnreachableNodeIsRejected) {
  Cfg cfg = parse_function("void f() {}");
  Statement orphan;
  orphan.kind = StatementKind::Nop;
  cfg.nodes.insert(cfg.nodes.begin() + 1, orphan);
  cfg.exit = 2;
  cfg.edges = {{0, 2}};
  EXPECT_THROW(validate(cfg), ValidationError);
}

TEST(CfgValidate, TargetMustMatchKind) {
  Cfg cfg = parse_function("void f() { int x = 1; }");
  cfg.nodes[1].target.reset();
  EXPECT_THROW(validate(cfg), ValidationError);
}

}  // namespace
}  // namespace deepdfa
