#include "sciflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "sciflow/error.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

json SynthConfig::to_json() const {
  return json{{"seed", seed},
              {"papers", papers},
              {"patents", patents},
              {"links", links},
              {"researchers", researchers},
              {"years", {years.lo, years.hi}}};
}

namespace {

std::string padded(const char* prefix, int i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, i);
  return buf;
}

// Two communities, two L1 fields each. L1 field f (0..3) belongs to
// community f / 2 and leans towards CPC subsection kAffinity[f].
const char* const kL0Labels[2] = {"Computing", "Life Sciences"};
const char* const kL1Labels[4] = {"Machine Learning", "Networking", "Molecular Biology",
                                  "Clinical Medicine"};
const char* const kSections[4] = {"G", "H", "A", "C"};  // G, H: community 0; A, C: community 1
const char* const kSectionLabels[4] = {"Physics", "Electricity", "Human Necessities",
                                       "Chemistry; Metallurgy"};
const char* const kSubsections[8] = {"G06", "G16", "H04", "H01", "A61", "A01", "C12", "C07"};
const char* const kGroups[16] = {"G06N", "G06F", "G16H", "G16B", "H04L", "H04W", "H01L", "H01M",
                                 "A61K", "A61B", "A01N", "A01H", "C12N", "C12Q", "C07K", "C07D"};
const int kAffinity[4] = {0, 2, 6, 4};  // subsection index per L1 field

const std::vector<std::vector<std::string>> kFieldWords = {
    {"neural", "learning", "gradient", "classifier", "embedding", "inference", "training", "kernel"},
    {"network", "routing", "wireless", "protocol", "latency", "packet", "spectrum", "bandwidth"},
    {"protein", "gene", "expression", "enzyme", "sequencing", "cellular", "molecular", "binding"},
    {"clinical", "patient", "therapy", "trial", "diagnosis", "cohort", "treatment", "dose"}};
const std::vector<std::vector<std::string>> kCommunityWords = {
    {"algorithm", "computing", "system", "data", "software", "hardware"},
    {"biological", "tissue", "disease", "organism", "health", "medical"}};
const std::vector<std::string> kGeneralWords = {
    "analysis", "method", "approach", "model", "study", "framework", "novel", "efficient",
    "robust", "scalable", "evaluation", "design", "toward", "improved", "large", "scale",
    "dynamic", "adaptive", "multi", "structure", "based", "using", "new", "performance",
    "optimal", "theory", "results", "application", "estimation", "measurement"};

const std::vector<std::string> kInstitutions = {
    "Northfield University", "Lakeside Institute of Technology", "Ridge College",
    "Eastbrook University", "Westmoor University", "Harbor Medical College",
    "Southgate University", "Pinecrest University"};

struct AssigneeSeed {
  const char* name;
  int community;  // -1: any
};
const AssigneeSeed kAssignees[] = {
    {"Northfield University", -1},       {"Eastbrook University", 1},
    {"Westmoor University", 0},          {"Lakeside Institute of Technology", 0},
    {"Harbor Medical College", 1},       {"Southgate University", -1},
    {"Vector Systems Inc", 0},           {"Quantum Logic Corp", 0},
    {"Bluewave Networks Ltd", 0},        {"Datacore Analytics LLC", 0},
    {"Helix Therapeutics Inc", 1},       {"Genova Biotech GmbH", 1},
    {"Meridian Pharma Corp", 1},         {"Clearpath Diagnostics Inc", 1},
    {"Summit Devices Corp", -1},         {"Howard Hughes Medical Institute", 1},
    {"Broad Institute", 1},              {"Department of Energy", 0},
};

std::string make_title(Rng& rng, int l1, int community, int words) {
  std::string title;
  for (int w = 0; w < words; ++w) {
    const double u = rng.uniform01();
    const auto& list = u < 0.35 ? kFieldWords[static_cast<std::size_t>(l1)]
                       : u < 0.5 ? kCommunityWords[static_cast<std::size_t>(community)]
                                 : kGeneralWords;
    if (!title.empty()) title += ' ';
    title += list[rng.uniform_index(list.size())];
  }
  if (!title.empty()) title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
  return title;
}

// Cumulative-weight sampler.
struct Sampler {
  std::vector<Index> items;
  std::vector<double> cumulative;

  void add(Index item, double w) {
    if (w <= 0.0) return;
    items.push_back(item);
    cumulative.push_back((cumulative.empty() ? 0.0 : cumulative.back()) + w);
  }
  bool empty() const { return items.empty(); }
  Index draw(Rng& rng) const {
    const double u = rng.uniform01() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    return items[static_cast<std::size_t>(it - cumulative.begin())];
  }
};

}  // namespace

CorpusData synth_corpus(const SynthConfig& cfg) {
  if (cfg.papers < 1 || cfg.patents < 1 || cfg.researchers < 2 || cfg.links < 0)
    throw ValidationError("synth: counts must be positive");
  if (cfg.years.lo > cfg.years.hi) throw ValidationError("synth: empty year range");
  Rng rng(derive_seed(cfg.seed, "synth"));
  CorpusData d;

  // Hierarchies.
  for (int c = 0; c < 2; ++c) {
    const std::string l0 = "F" + std::to_string(c);
    d.fields.push_back({l0, kL0Labels[c], 0, std::nullopt});
    for (int a = 0; a < 2; ++a) {
      const int f = 2 * c + a;
      const std::string l1 = l0 + "." + std::to_string(a);
      d.fields.push_back({l1, kL1Labels[f], 1, l0});
      for (int b = 0; b < 2; ++b) {
        const std::string l2 = l1 + "." + std::to_string(b);
        d.fields.push_back({l2, std::string(kL1Labels[f]) + " " + std::to_string(b + 1), 2, l1});
        for (int e = 0; e < 2; ++e) {
          const std::string l3 = l2 + "." + std::to_string(e);
          d.fields.push_back(
              {l3, std::string(kL1Labels[f]) + " " + std::to_string(b + 1) + "." + std::to_string(e + 1), 3, l2});
        }
      }
    }
  }
  for (int s = 0; s < 4; ++s) {
    d.cpc.push_back({kSections[s], kSectionLabels[s], 0, std::nullopt});
    for (int ss = 2 * s; ss < 2 * s + 2; ++ss) {
      d.cpc.push_back({kSubsections[ss], kSubsections[ss], 1, std::string(kSections[s])});
      for (int g = 2 * ss; g < 2 * ss + 2; ++g)
        d.cpc.push_back({kGroups[g], kGroups[g], 2, std::string(kSubsections[ss])});
    }
  }

  // Researchers: first half community 0, second half community 1.
  const int nr = cfg.researchers;
  auto researcher_community = [&](int r) { return r < nr / 2 ? 0 : 1; };
  std::vector<std::vector<int>> community_researchers(2);
  for (int r = 0; r < nr; ++r) {
    community_researchers[static_cast<std::size_t>(researcher_community(r))].push_back(r);
    Researcher res;
    res.id = padded("R", r + 1, 4);
    res.name = "Researcher " + std::to_string(r + 1);
    const auto g = rng.uniform_index(10);
    res.gender = g < 4 ? Gender::Female : g < 9 ? Gender::Male : Gender::Other;
    static const char* const ranks[] = {"Assistant Professor", "Associate Professor", "Professor"};
    res.rank = ranks[rng.uniform_index(3)];
    const auto inst = 4 * static_cast<std::size_t>(researcher_community(r)) + rng.uniform_index(4);
    res.affiliation = kInstitutions[inst];
    if (!rng.bernoulli(0.1)) {
      int disclosures = 0;
      while (rng.bernoulli(0.6) && disclosures < 30) ++disclosures;
      res.invention_disclosure_count = disclosures;
      res.granted_patent_count = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(disclosures) + 1));
    }
    d.researchers.push_back(std::move(res));
  }

  // Papers, in year order so that ids increase with time.
  const int np = cfg.papers;
  std::vector<int> years(static_cast<std::size_t>(np));
  for (auto& y : years)
    y = cfg.years.lo + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.years.span())));
  std::sort(years.begin(), years.end());

  std::vector<int> paper_l1(static_cast<std::size_t>(np));
  std::vector<int> paper_community(static_cast<std::size_t>(np));
  std::vector<std::vector<Index>> slots(2);  // preferential attachment, per community
  std::vector<Index> all_slots;
  for (int i = 0; i < np; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Paper p;
    p.id = padded("P", i + 1, 5);
    p.year = years[ui];
    const int c = static_cast<int>(rng.uniform_index(2));
    const int l1 = 2 * c + static_cast<int>(rng.uniform_index(2));
    paper_community[ui] = c;
    paper_l1[ui] = l1;
    const std::string l1_id = "F" + std::to_string(c) + "." + std::to_string(l1 % 2);
    if (!rng.bernoulli(0.02)) {
      auto leaf = [&] {
        return l1_id + "." + std::to_string(rng.uniform_index(2)) + "." + std::to_string(rng.uniform_index(2));
      };
      p.field_ids.push_back(leaf());
      if (rng.bernoulli(0.15)) {
        auto extra = leaf();
        if (extra != p.field_ids.front()) p.field_ids.push_back(extra);
      }
    }
    p.title = make_title(rng, l1, c, 5 + static_cast<int>(rng.uniform_index(6)));
    if (!rng.bernoulli(0.05)) p.venue_id = padded("V", 10 * c + static_cast<int>(rng.uniform_index(10)), 2);

    // Team.
    int team = 1;
    while (team < 8 && rng.bernoulli(0.55)) ++team;
    std::set<std::string> authors;
    const auto& pool = community_researchers[static_cast<std::size_t>(c)];
    for (int k = 0; k < team; ++k) {
      if (rng.bernoulli(0.1)) {
        authors.insert("X" + p.id + "-" + std::to_string(k));
      } else {
        const int r = pool[rng.uniform_index(pool.size())];
        authors.insert(d.researchers[static_cast<std::size_t>(r)].id);
      }
    }
    p.author_ids.assign(authors.begin(), authors.end());
    for (const auto& a : p.author_ids)
      if (a[0] == 'R') d.researchers[static_cast<std::size_t>(std::stoi(a.substr(1)) - 1)].paper_ids.push_back(p.id);

    p.grant_count = 0;
    while (p.grant_count < 4 && rng.bernoulli(0.45)) ++p.grant_count;
    static const char* const funders[] = {"NSF", "NIH", "DOE"};
    for (int g = 0; g < p.grant_count; ++g) ++p.grant_breakdown[funders[rng.uniform_index(3)]];

    // References among earlier papers.
    const int wanted = std::min(i, static_cast<int>(rng.uniform_index(9)));
    std::set<Index> refs;
    for (int attempt = 0; static_cast<int>(refs.size()) < wanted && attempt < 40; ++attempt) {
      const bool same = rng.bernoulli(0.9);
      const auto& s = same ? slots[static_cast<std::size_t>(c)] : all_slots;
      if (s.empty()) continue;
      refs.insert(s[rng.uniform_index(s.size())]);
    }
    for (Index r : refs) {
      d.paper_citations.emplace_back(p.id, padded("P", static_cast<int>(r) + 1, 5));
      slots[static_cast<std::size_t>(paper_community[r])].push_back(r);
      all_slots.push_back(r);
    }
    slots[static_cast<std::size_t>(c)].push_back(static_cast<Index>(i));
    all_slots.push_back(static_cast<Index>(i));
    d.papers.push_back(std::move(p));
  }

  // Heavy-tailed attractiveness to patents: half the papers are never cited.
  std::vector<double> attract(static_cast<std::size_t>(np));
  for (auto& a : attract) a = rng.bernoulli(0.5) ? 0.0 : std::exp(1.2 * rng.normal());
  std::vector<Sampler> by_l1(4), by_community(2);
  Sampler anywhere;
  for (int i = 0; i < np; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    by_l1[static_cast<std::size_t>(paper_l1[ui])].add(static_cast<Index>(i), attract[ui]);
    by_community[static_cast<std::size_t>(paper_community[ui])].add(static_cast<Index>(i), attract[ui]);
    anywhere.add(static_cast<Index>(i), attract[ui]);
  }

  // Patents.
  const int nt = cfg.patents;
  std::vector<int> patent_l1(static_cast<std::size_t>(nt));
  const int first_patent_year = std::min(cfg.years.lo + 3, cfg.years.hi);
  for (int t = 0; t < nt; ++t) {
    Patent pt;
    pt.id = padded("T", t + 1, 5);
    const int c = static_cast<int>(rng.uniform_index(2));
    const int l1 = 2 * c + static_cast<int>(rng.uniform_index(2));
    patent_l1[static_cast<std::size_t>(t)] = l1;
    pt.application_year =
        first_patent_year + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cfg.years.hi - first_patent_year + 1)));
    pt.title = make_title(rng, l1, c, 4 + static_cast<int>(rng.uniform_index(5)));
    std::vector<const AssigneeSeed*> names;
    for (const auto& a : kAssignees)
      if (a.community < 0 || a.community == c) names.push_back(&a);
    pt.assignee_name = names[rng.uniform_index(names.size())]->name;

    auto code_for = [&](int ss) {
      const int g = 2 * ss + static_cast<int>(rng.uniform_index(2));
      return CpcCode{kSections[ss / 2], kSubsections[ss], kGroups[g]};
    };
    const int home = rng.bernoulli(0.7) ? kAffinity[l1] : 4 * c + static_cast<int>(rng.uniform_index(4));
    pt.cpc_codes.push_back(code_for(home));
    if (rng.bernoulli(0.4)) {
      auto extra = code_for(4 * c + static_cast<int>(rng.uniform_index(4)));
      if (!(extra == pt.cpc_codes.front())) pt.cpc_codes.push_back(extra);
    }
    d.patents.push_back(std::move(pt));
  }

  // Exactly cfg.links distinct (patent, paper) pairs; cited papers are at
  // most ten years older than the citing application.
  std::set<std::pair<Index, Index>> links;
  const std::uint64_t max_attempts = 200ULL * static_cast<std::uint64_t>(cfg.links) + 10000;
  for (std::uint64_t attempt = 0; static_cast<int>(links.size()) < cfg.links; ++attempt) {
    if (attempt >= max_attempts)
      throw ValidationError("synth: cannot place " + std::to_string(cfg.links) + " patent links");
    const auto t = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(nt)));
    const int l1 = patent_l1[t];
    const double u = rng.uniform01();
    const Sampler& s = u < 0.7 ? by_l1[static_cast<std::size_t>(l1)]
                       : u < 0.95 ? by_community[static_cast<std::size_t>(l1 / 2)]
                                  : anywhere;
    if (s.empty()) continue;
    const Index p = s.draw(rng);
    const int gap = d.patents[t].application_year - d.papers[p].year;
    if (gap < 0 || gap > 10) continue;
    links.emplace(t, p);
  }
  for (const auto& [t, p] : links) d.paper_patent_citations.emplace_back(d.patents[t].id, d.papers[p].id);

  d.rules.university = {"university", "college", "institute of technology"};
  d.rules.company = {"inc", "corp", "ltd", "llc", "gmbh"};
  d.overrides["Broad Institute"] = AssigneeClass::University;
  return d;
}

namespace {

json node_json(const HierarchyNode& n) {
  return json{{"id", n.id}, {"label", n.label}, {"level", n.level}, {"parent_id", optional_to_json(n.parent_id)}};
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::string text;
  for (const auto& r : rows) text += r.dump() + "\n";
  write_text_file(path, text);
}

void write_pairs(const std::filesystem::path& path, const char* a, const char* b,
                 const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string text = std::string(a) + "," + b + "\n";
  for (const auto& [x, y] : rows) text += x + "," + y + "\n";
  write_text_file(path, text);
}

}  // namespace

std::filesystem::path write_corpus(const CorpusData& d, const std::filesystem::path& dir,
                                   const YearRange& window) {
  std::vector<json> rows;
  for (const auto& p : d.papers)
    rows.push_back({{"id", p.id},
                    {"title", p.title},
                    {"year", p.year},
                    {"venue_id", optional_to_json(p.venue_id)},
                    {"field_ids", p.field_ids},
                    {"author_ids", p.author_ids},
                    {"grant_count", p.grant_count},
                    {"grant_breakdown", p.grant_breakdown}});
  write_lines(dir / "papers.jsonl", rows);

  rows.clear();
  for (const auto& t : d.patents) {
    json codes = json::array();
    for (const auto& c : t.cpc_codes) codes.push_back({c.section, c.subsection, c.group});
    rows.push_back({{"id", t.id},
                    {"title", t.title},
                    {"application_year", t.application_year},
                    {"assignee_name", t.assignee_name},
                    {"cpc_codes", codes}});
  }
  write_lines(dir / "patents.jsonl", rows);

  rows.clear();
  for (const auto& r : d.researchers) {
    json gender = nullptr;
    if (r.gender) gender = *r.gender == Gender::Female ? "female" : *r.gender == Gender::Male ? "male" : "other";
    rows.push_back({{"id", r.id},
                    {"name", r.name},
                    {"gender", gender},
                    {"rank", optional_to_json(r.rank)},
                    {"affiliation", optional_to_json(r.affiliation)},
                    {"paper_ids", r.paper_ids},
                    {"invention_disclosure_count", optional_to_json(r.invention_disclosure_count)},
                    {"granted_patent_count", optional_to_json(r.granted_patent_count)}});
  }
  write_lines(dir / "researchers.jsonl", rows);

  rows.clear();
  for (const auto& n : d.fields) rows.push_back(node_json(n));
  write_lines(dir / "fields.jsonl", rows);
  rows.clear();
  for (const auto& n : d.cpc) rows.push_back(node_json(n));
  write_lines(dir / "cpc.jsonl", rows);

  write_pairs(dir / "paper_citations.csv", "citing_id", "cited_id", d.paper_citations);
  write_pairs(dir / "paper_patent_citations.csv", "patent_id", "paper_id", d.paper_patent_citations);
  write_text_file(dir / "assignee_rules.json", d.rules.to_json().dump(2) + "\n");
  json overrides = json::object();
  for (const auto& [name, cls] : d.overrides) overrides[name] = to_string(cls);
  write_text_file(dir / "overrides.json", overrides.dump(2) + "\n");

  const json manifest = {{"papers", "papers.jsonl"},
                         {"patents", "patents.jsonl"},
                         {"paper_citations", "paper_citations.csv"},
                         {"paper_patent_citations", "paper_patent_citations.csv"},
                         {"researchers", "researchers.jsonl"},
                         {"fields", "fields.jsonl"},
                         {"cpc", "cpc.jsonl"},
                         {"assignee_rules", "assignee_rules.json"},
                         {"overrides", "overrides.json"},
                         {"window", {window.lo, window.hi}}};
  const auto path = dir / "manifest.json";
  write_text_file(path, manifest.dump(2) + "\n");
  return path;
}

int synth_field_community(const Corpus& corpus, Index paper) {
  const auto& fields = corpus.paper_fields(paper);
  if (fields.empty()) return -1;
  const auto root = corpus.fields().ancestor_at(fields.front(), 0);
  return corpus.fields().node(*root).id == "F0" ? 0 : 1;
}

}  // namespace sciflow
