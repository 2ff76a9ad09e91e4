#pragma once

// Deterministic synthetic corpus with planted structure: two research
// communities that cite mostly within themselves, heavy-tailed patent
// citations, and a fixed field -> CPC subsection affinity.

#include <cstdint>
#include <filesystem>

#include "sciflow/corpus.hpp"

namespace sciflow {

struct SynthConfig {
  std::uint64_t seed = 7;
  int papers = 2000;
  int patents = 500;
  int links = 5000;  // distinct (patent, paper) pairs, exact
  int researchers = 120;
  YearRange years{2001, 2020};

  json to_json() const;
};

CorpusData synth_corpus(const SynthConfig& config);

// Writes papers.jsonl, patents.jsonl, the two citation CSVs, researchers.jsonl,
// fields.jsonl, cpc.jsonl, assignee_rules.json, overrides.json and
// manifest.json into `dir`. Returns the manifest path.
std::filesystem::path write_corpus(const CorpusData& data, const std::filesystem::path& dir,
                                   const YearRange& window);

// Community (0 or 1) planted for a synthetic paper, from the L0 ancestor of
// its first field; -1 for a paper without fields.
int synth_field_community(const Corpus& corpus, Index paper);

}  // namespace sciflow
