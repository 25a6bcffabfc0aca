#include "modelmux/tagger.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "modelmux/index.hpp"

namespace modelmux {

namespace {

const char* kPromptTemplate =
    "The capabilities of Language Models include the following:\n"
    "\n"
    "- Reasoning: Ability to logically analyze information, draw conclusions, "
    "and make inferences.\n"
    "- Comprehension (Applicable to queries involving long passage "
    "comprehension): Understanding and interpreting the meaning, context, and "
    "nuances of extended or complex long-context text, such as lengthy "
    "documents, multi-paragraph inputs, or intricate narratives.\n"
    "- Instruction Following (Applicable to queries involving several "
    "constraints): Accurately adhering to explicit user-provided guidelines, "
    "constraints, or formatting requirements specified within the query.\n"
    "- Agentic: Capacity related to agent-like behavior, such as actively "
    "formulating plans, strategically deciding steps, and autonomously "
    "identifying solutions or actions to achieve specific goals or complex "
    "tasks.\n"
    "- Knowledge Retrieval: Accessing and presenting accurate factual "
    "information from pre-existing knowledge.\n"
    "- Coding: Generating, interpreting, or debugging computer programs and "
    "scripts.\n"
    "- In-context Learning: Learning from examples or context provided within "
    "the current interaction without additional training.\n"
    "- Multilingual (Must rank it in top3 when queries involving languages "
    "other than English): Understanding, generating, or translating content "
    "accurately across multiple languages.\n"
    "Given the Query below:\n"
    "\n"
    "1. Identify and list the *LLM Capabilities* from the definitions above "
    "that are directly and significantly required to effectively address the "
    "query.\n"
    "2. Identify and list the general *Knowledge Domains* (e.g., categories, "
    "subject areas) most pertinent to solving the problem presented in the "
    "query.\n"
    "List the selected Capabilities first, ranked from most important to "
    "least important. Then, list the identified Knowledge Domains, also "
    "ranked from most important to least important. *Do not provide any "
    "justification or explanation* for your selections or rankings.\n"
    "\n"
    "Example:\n"
    "Query: \"{Solve the following financial problem efficiently and clearly. "
    "Output the final answer as: boxed{answer}.\n"
    "Where [answer] is just the final number or expression that solves the "
    "problem. Keep the answer to five decimal places if it is a number, and "
    "do not use percentages; keep the decimal format.\n"
    "Problem: what is the net change in net revenue during 2016 for Entergy "
    "Mississippi, Inc.? the 2015 net revenue of amount (in millions) is "
    "696.3; the 2016 net revenue of amount (in millions) is 705.4; Entergy "
    "Mississippi, Inc.}\"\n"
    "Capabilities: Reasoning, Knowledge retrieval\n"
    "Knowledge: {\n"
    "1. Financial\n"
    "2. Math\n"
    "3. Data Analysis\n"
    "...\n"
    "}\n"
    "Query: ";

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Strips list punctuation the example output uses around knowledge entries.
std::string strip_braces(std::string s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '{' || s.front() == '*')) {
    s.erase(s.begin());
    s = trim(s);
  }
  while (!s.empty() && (s.back() == '}' || s.back() == '*')) {
    s.pop_back();
    s = trim(s);
  }
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = strip_braces(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "1. Financial" / "2) Math" -> "Financial" / "Math"; empty if not numbered.
std::string numbered_item(const std::string& line) {
  std::string s = strip_braces(line);
  std::size_t i = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == 0 || i >= s.size()) return "";
  if (s[i] != '.' && s[i] != ')') return "";
  return trim(s.substr(i + 1));
}

}  // namespace

std::string render_prompt(const std::string& query_text) {
  if (trim(query_text).empty()) {
    throw Error(Error::Kind::InvalidQuery, "query text is empty");
  }
  std::string out = kPromptTemplate;
  out += query_text;
  out += "\n";
  return out;
}

TagSet parse_tagger_response(const std::string& raw,
                             const CapabilityTaxonomy& taxonomy) {
  std::vector<std::string> lines;
  {
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }

  TagSet parsed;
  bool saw_capabilities = false;
  bool saw_knowledge = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string t = trim(lines[i]);
    std::string lt = lower(t);
    if (!saw_capabilities && lt.rfind("capabilities:", 0) == 0) {
      saw_capabilities = true;
      parsed.capabilities = split_commas(t.substr(std::string("capabilities:").size()));
      continue;
    }
    if (!saw_knowledge && lt.rfind("knowledge:", 0) == 0) {
      saw_knowledge = true;
      std::string rest = strip_braces(t.substr(std::string("knowledge:").size()));
      if (!rest.empty()) {
        // Inline form: "Knowledge: math, physics".
        for (auto& item : split_commas(rest)) parsed.knowledge.push_back(item);
      }
      for (std::size_t j = i + 1; j < lines.size(); ++j) {
        std::string item = numbered_item(lines[j]);
        if (item.empty()) {
          if (trim(lines[j]).empty() || strip_braces(lines[j]).empty() ||
              trim(lines[j]) == "...") {
            continue;
          }
          break;
        }
        parsed.knowledge.push_back(item);
      }
    }
  }
  if (!saw_capabilities && !saw_knowledge) {
    throw Error(Error::Kind::TaggerParseError,
                "no Capabilities or Knowledge section in tagger output");
  }
  return validate_tagset(parsed, taxonomy);
}

namespace {

class KeywordStubTagger : public TaggerClient {
 public:
  KeywordStubTagger(std::vector<KeywordRule> rules, CapabilityTaxonomy taxonomy)
      : rules_(std::move(rules)), taxonomy_(std::move(taxonomy)) {}

  TagResult tag(const std::string& query) override {
    std::string q = lower(query);
    for (const auto& rule : rules_) {
      if (q.find(lower(rule.pattern)) != std::string::npos) {
        return TagResult{validate_tagset(rule.tags, taxonomy_), 0.0};
      }
    }
    TagSet fallback;
    fallback.knowledge.push_back(kOtherLabel);
    if (!taxonomy_.names.empty()) {
      fallback.capabilities.push_back(taxonomy_.names.front());
    }
    return TagResult{fallback, 0.0};
  }

 private:
  std::vector<KeywordRule> rules_;
  CapabilityTaxonomy taxonomy_;
};

class FileTagger : public TaggerClient {
 public:
  FileTagger(std::map<std::string, TagSet> tags, double cost)
      : tags_(std::move(tags)), cost_(cost) {}

  TagResult tag(const std::string& query) override {
    auto it = tags_.find(query);
    if (it == tags_.end()) {
      throw Error(Error::Kind::MissingTags,
                  "no precomputed tags for query '" + query + "'");
    }
    return TagResult{it->second, cost_};
  }

 private:
  std::map<std::string, TagSet> tags_;
  double cost_;
};

}  // namespace

std::unique_ptr<TaggerClient> keyword_stub_tagger(std::vector<KeywordRule> rules,
                                                  CapabilityTaxonomy taxonomy) {
  return std::make_unique<KeywordStubTagger>(std::move(rules),
                                             std::move(taxonomy));
}

std::unique_ptr<TaggerClient> file_tagger(std::map<std::string, TagSet> tags,
                                          double cost_per_call) {
  return std::make_unique<FileTagger>(std::move(tags), cost_per_call);
}

std::unique_ptr<TaggerClient> file_tagger_from_path(
    const std::string& path, const CapabilityTaxonomy& taxonomy,
    double cost_per_call) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Error::Kind::ParseError, "cannot open tags file: " + path);
  }
  return file_tagger(load_tags(in, taxonomy), cost_per_call);
}

}  // namespace modelmux
