#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "modelmux/tagger.hpp"

using namespace modelmux;

namespace {

const CapabilityTaxonomy& tax() {
  static CapabilityTaxonomy t = CapabilityTaxonomy::defaults();
  return t;
}

}  // namespace

TEST_CASE("render_prompt embeds the capability definitions verbatim") {
  std::string prompt = render_prompt("What is 2+2?");
  CHECK(prompt.find("The capabilities of Language Models include the "
                    "following:") != std::string::npos);
  CHECK(prompt.find("- Reasoning: Ability to logically analyze information, "
                    "draw conclusions, and make inferences.") !=
        std::string::npos);
  CHECK(prompt.find("- Multilingual (Must rank it in top3 when queries "
                    "involving languages other than English)") !=
        std::string::npos);
  CHECK(prompt.find("*Do not provide any justification or explanation*") !=
        std::string::npos);
  CHECK(prompt.find("Capabilities: Reasoning, Knowledge retrieval") !=
        std::string::npos);
  CHECK(prompt.find("1. Financial") != std::string::npos);
  // The query goes at the end.
  CHECK(prompt.rfind("Query: What is 2+2?\n") == prompt.size() -
                                                     std::string("Query: What "
                                                                 "is 2+2?\n")
                                                         .size());
}

TEST_CASE("render_prompt is byte-stable and rejects empty queries") {
  CHECK(render_prompt("abc") == render_prompt("abc"));
  try {
    render_prompt("   \n\t ");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::InvalidQuery);
  }
}

TEST_CASE("parse_tagger_response handles the braced numbered format") {
  std::string raw =
      "Capabilities: Reasoning, Knowledge retrieval\n"
      "Knowledge: {\n"
      "1. Financial\n"
      "2. Math\n"
      "3. Data Analysis\n"
      "...\n"
      "}\n";
  TagSet tags = parse_tagger_response(raw, tax());
  CHECK(tags.capabilities ==
        std::vector<std::string>{"reasoning", "knowledge retrieval"});
  CHECK(tags.knowledge ==
        std::vector<std::string>{"financial", "math", "data analysis"});
}

TEST_CASE("parse_tagger_response handles inline knowledge lists") {
  TagSet tags = parse_tagger_response(
      "Capabilities: Coding\nKnowledge: math, physics\n", tax());
  CHECK(tags.capabilities == std::vector<std::string>{"coding"});
  CHECK(tags.knowledge == std::vector<std::string>{"math", "physics"});
}

TEST_CASE("parse_tagger_response tolerates a missing knowledge section") {
  TagSet tags = parse_tagger_response("Capabilities: Reasoning\n", tax());
  CHECK(tags.capabilities == std::vector<std::string>{"reasoning"});
  CHECK(tags.knowledge.empty());
}

TEST_CASE("parse_tagger_response drops capabilities outside the taxonomy") {
  TagSet tags = parse_tagger_response(
      "Capabilities: Reasoning, Telepathy\nKnowledge: math\n", tax());
  CHECK(tags.capabilities == std::vector<std::string>{"reasoning"});
}

TEST_CASE("parse_tagger_response stops the numbered list at prose") {
  std::string raw =
      "Capabilities: Reasoning\n"
      "Knowledge:\n"
      "1. Math\n"
      "2. Physics\n"
      "These rankings reflect the problem structure.\n"
      "3. Chemistry\n";
  TagSet tags = parse_tagger_response(raw, tax());
  CHECK(tags.knowledge == std::vector<std::string>{"math", "physics"});
}

TEST_CASE("parse_tagger_response rejects output with neither section") {
  try {
    parse_tagger_response("I could not classify this query, sorry.\n", tax());
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::TaggerParseError);
  }
}

TEST_CASE("parse of the rendered example section round-trips") {
  // Feeding the worked example's answer back through the parser recovers
  // the example's tags; pinned so parser edits keep the documented format.
  std::string raw =
      "Capabilities: Reasoning, Knowledge retrieval\n"
      "Knowledge: {\n1. Financial\n2. Math\n3. Data Analysis\n...\n}\n";
  TagSet a = parse_tagger_response(raw, tax());
  TagSet b = parse_tagger_response(raw, tax());
  CHECK(a == b);
  CHECK(a.knowledge.size() == 3);
}

TEST_CASE("keyword stub applies the first matching rule") {
  std::vector<KeywordRule> rules;
  KeywordRule math;
  math.pattern = "integral";
  math.tags.knowledge = {"math"};
  math.tags.capabilities = {"Reasoning"};
  KeywordRule code;
  code.pattern = "python";
  code.tags.knowledge = {"programming"};
  code.tags.capabilities = {"Coding"};
  rules.push_back(math);
  rules.push_back(code);
  auto tagger = keyword_stub_tagger(rules, tax());

  auto got = tagger->tag("Compute the integral of x^2 in Python");
  CHECK(got.tags.knowledge == std::vector<std::string>{"math"});
  CHECK(got.tags.capabilities == std::vector<std::string>{"reasoning"});
  CHECK(got.tagging_cost == 0.0);

  got = tagger->tag("Write a PYTHON script");
  CHECK(got.tags.knowledge == std::vector<std::string>{"programming"});

  got = tagger->tag("Unmatched text");
  CHECK(got.tags.knowledge == std::vector<std::string>{kOtherLabel});
  CHECK(got.tags.capabilities == std::vector<std::string>{"reasoning"});
}

TEST_CASE("file tagger replays stored tags and reports cost") {
  std::map<std::string, TagSet> tags;
  TagSet t;
  t.knowledge = {"math"};
  t.capabilities = {"reasoning"};
  tags["q1"] = t;
  auto tagger = file_tagger(tags, 0.004);
  auto got = tagger->tag("q1");
  CHECK(got.tags == t);
  CHECK(got.tagging_cost == 0.004);
  try {
    tagger->tag("q2");
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.kind() == Error::Kind::MissingTags);
  }
}

TEST_CASE("file tagger loads from a tags file") {
  std::string path = "tagger_test_tags.jsonl";
  {
    std::ofstream out(path);
    out << R"({"query_id": "q7", "knowledge": ["History"], "capabilities": ["Knowledge retrieval"]})"
        << "\n";
  }
  auto tagger = file_tagger_from_path(path, tax(), 0.01);
  auto got = tagger->tag("q7");
  CHECK(got.tags.knowledge == std::vector<std::string>{"history"});
  CHECK(got.tags.capabilities ==
        std::vector<std::string>{"knowledge retrieval"});
  CHECK(got.tagging_cost == 0.01);
  std::remove(path.c_str());

  CHECK_THROWS_AS(file_tagger_from_path("does/not/exist.jsonl", tax()), Error);
}
