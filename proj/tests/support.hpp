#pragma once

// Small builders and helpers shared by the test binaries.

#include <unistd.h>

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sciflow/corpus.hpp"
#include "sciflow/synth.hpp"

namespace testing {

using namespace sciflow;

inline CpcCode code(const std::string& section, char group = 'x') {
  return {section, section + "1", section + "1" + group};
}

// Hand-built corpus. Field tree: Fa > Fa1 > Fa11 > Fa111 and Fa > Fa2 > Fa21 > Fa211,
// Fb > Fb1 > Fb11 > Fb111. CPC: sections A-D, one subsection X1, groups X1x, X1y.
struct Tiny {
  CorpusData d;

  Tiny() {
    auto chain = [&](const std::string& root, const std::vector<std::string>& l1s) {
      d.fields.push_back({root, root, 0, std::nullopt});
      for (const auto& l1 : l1s) {
        d.fields.push_back({l1, l1, 1, root});
        d.fields.push_back({l1 + "1", l1 + "1", 2, l1});
        d.fields.push_back({l1 + "11", l1 + "11", 3, l1 + "1"});
      }
    };
    chain("Fa", {"Fa1", "Fa2"});
    chain("Fb", {"Fb1"});
    for (std::string s : {"A", "B", "C", "D"}) {
      d.cpc.push_back({s, s, 0, std::nullopt});
      d.cpc.push_back({s + "1", s + "1", 1, s});
      d.cpc.push_back({s + "1x", s + "1x", 2, s + "1"});
      d.cpc.push_back({s + "1y", s + "1y", 2, s + "1"});
    }
    d.rules.university = {"university"};
    d.rules.company = {"inc", "gmbh"};
  }

  Tiny& paper(const std::string& id, int year, std::vector<std::string> refs = {},
              std::vector<std::string> authors = {}, std::vector<std::string> fields = {},
              std::optional<std::string> venue = std::nullopt, int grants = 0,
              const std::string& title = "") {
    Paper p;
    p.id = id;
    p.year = year;
    p.reference_ids = std::move(refs);
    p.author_ids = std::move(authors);
    p.field_ids = std::move(fields);
    p.venue_id = std::move(venue);
    p.grant_count = grants;
    p.title = title;
    d.papers.push_back(std::move(p));
    return *this;
  }

  Tiny& patent(const std::string& id, int year, std::vector<CpcCode> codes,
               const std::string& assignee = "", const std::string& title = "") {
    Patent t;
    t.id = id;
    t.application_year = year;
    t.cpc_codes = std::move(codes);
    t.assignee_name = assignee;
    t.title = title;
    d.patents.push_back(std::move(t));
    return *this;
  }

  Tiny& cite(const std::string& patent, const std::string& paper) {
    d.paper_patent_citations.emplace_back(patent, paper);
    return *this;
  }

  Tiny& researcher(const std::string& id, std::vector<std::string> papers,
                   std::optional<std::string> affiliation = std::nullopt) {
    Researcher r;
    r.id = id;
    r.name = id;
    r.paper_ids = std::move(papers);
    r.affiliation = std::move(affiliation);
    d.researchers.push_back(std::move(r));
    return *this;
  }

  std::shared_ptr<const Corpus> build(YearRange window = {1900, 2100}) const {
    return Corpus::build(d, {window});
  }
};

inline const SynthConfig& synth_config() {
  static const SynthConfig cfg{};
  return cfg;
}

inline const CorpusData& synthetic_data() {
  static const CorpusData data = synth_corpus(synth_config());
  return data;
}

// The default synthetic corpus, built once per test binary.
inline std::shared_ptr<const Corpus> synthetic() {
  static const auto corpus = Corpus::build(synthetic_data(), {synth_config().years});
  return corpus;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("sciflow_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
