#pragma once

// Multi-source dataset: papers, patents, researchers, paper-paper and
// paper-patent citations, the research-field and CPC hierarchies.
//
// A Corpus is immutable once built. All cross references are resolved to
// dense 32-bit indices at load time; string ids are opaque.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sciflow/io.hpp"

namespace sciflow {

using Index = std::uint32_t;

struct YearRange {
  int lo = 2001;
  int hi = 2020;

  bool contains(int year) const { return lo <= year && year <= hi; }
  int span() const { return hi - lo + 1; }
  bool operator==(const YearRange&) const = default;
};

// Parses "2001:2020".
YearRange parse_year_range(std::string_view text);

enum class AssigneeClass { University, Company, Other };
std::string_view to_string(AssigneeClass c);
AssigneeClass assignee_class_from_string(std::string_view s);

enum class Gender { Female, Male, Other };

struct CpcCode {
  std::string section;
  std::string subsection;
  std::string group;
  bool operator==(const CpcCode&) const = default;
};

struct Paper {
  std::string id;
  std::string title;
  int year = 0;
  std::optional<std::string> venue_id;
  std::vector<std::string> field_ids;
  std::vector<std::string> author_ids;
  std::vector<std::string> reference_ids;
  int grant_count = 0;
  // Optional per-funder split of grant_count, e.g. {"NSF": 1, "NIH": 2}.
  std::map<std::string, int> grant_breakdown;
};

struct Patent {
  std::string id;
  std::string title;
  int application_year = 0;
  std::string assignee_name;
  AssigneeClass assignee_class = AssigneeClass::Other;
  std::vector<CpcCode> cpc_codes;
};

struct Researcher {
  std::string id;
  std::string name;
  std::optional<Gender> gender;
  std::optional<std::string> rank;
  std::optional<std::string> affiliation;
  std::vector<std::string> paper_ids;
  std::optional<int> invention_disclosure_count;
  std::optional<int> granted_patent_count;
};

struct HierarchyNode {
  std::string id;
  std::string label;
  int level = 0;
  std::optional<std::string> parent_id;
};

// Forest with levels 0..max_level; a node's level is its parent's level + 1.
class Hierarchy {
 public:
  Hierarchy() = default;
  Hierarchy(std::vector<HierarchyNode> nodes, int max_level, std::string name);

  std::size_t size() const { return nodes_.size(); }
  int max_level() const { return max_level_; }
  const HierarchyNode& node(Index i) const { return nodes_[i]; }
  std::optional<Index> find(std::string_view id) const;
  Index at(std::string_view id) const;  // throws ValidationError
  std::optional<Index> parent(Index i) const { return parents_[i]; }
  const std::vector<Index>& children(Index i) const { return children_[i]; }
  const std::vector<Index>& roots() const { return roots_; }
  // Ancestor-or-self at `level`; nullopt when the node is shallower.
  std::optional<Index> ancestor_at(Index i, int level) const;
  bool is_descendant_or_self(Index node, Index ancestor) const;
  std::vector<Index> nodes_at_level(int level) const;

 private:
  std::vector<HierarchyNode> nodes_;
  std::vector<std::optional<Index>> parents_;
  std::vector<std::vector<Index>> children_;  // sorted by id
  std::vector<Index> roots_;                  // sorted by id
  std::unordered_map<std::string, Index> by_id_;
  int max_level_ = 0;
};

// Ordered keyword lists; university keywords are tried first.
struct AssigneeRules {
  std::vector<std::string> university;
  std::vector<std::string> company;

  static AssigneeRules from_json(const json& j);
  json to_json() const;
};

// Case-insensitive substring match; first matching list wins, else Other.
AssigneeClass classify_assignee(std::string_view name, const AssigneeRules& rules);

// Locations of the ingest inputs. Relative paths resolve against the
// manifest's directory.
struct IngestManifest {
  std::filesystem::path papers;
  std::filesystem::path patents;
  std::filesystem::path paper_citations;
  std::filesystem::path paper_patent_citations;
  std::filesystem::path researchers;
  std::filesystem::path fields;
  std::filesystem::path cpc;
  std::filesystem::path assignee_rules;
  std::optional<std::filesystem::path> overrides;
  std::optional<YearRange> window;

  static IngestManifest load(const std::filesystem::path& manifest_path);
};

// Raw records before validation and indexing.
struct CorpusData {
  std::vector<Paper> papers;
  std::vector<Patent> patents;
  std::vector<std::pair<std::string, std::string>> paper_citations;         // citing, cited
  std::vector<std::pair<std::string, std::string>> paper_patent_citations;  // patent, paper
  std::vector<Researcher> researchers;
  std::vector<HierarchyNode> fields;
  std::vector<HierarchyNode> cpc;
  AssigneeRules rules;
  std::map<std::string, AssigneeClass> overrides;
};

CorpusData read_corpus_data(const IngestManifest& manifest);

// Counts of records dropped or merged while building a corpus.
struct IngestReport {
  std::size_t papers_outside_window = 0;
  std::size_t references_to_dropped_papers = 0;
  std::size_t patents_without_cpc = 0;
  std::size_t patent_links_to_dropped = 0;
  std::size_t duplicate_patent_links = 0;
  std::size_t researcher_papers_dropped = 0;

  json to_json() const;
};

struct CorpusOptions {
  YearRange window{2001, 2020};
};

class Corpus {
 public:
  // Validates and indexes. Throws ValidationError on dangling or duplicate ids.
  static std::shared_ptr<const Corpus> build(CorpusData data, const CorpusOptions& options);
  static std::shared_ptr<const Corpus> load(const std::filesystem::path& manifest_path,
                                            std::optional<YearRange> window_override = {});

  const YearRange& window() const { return window_; }
  const IngestReport& report() const { return report_; }

  std::size_t paper_count() const { return papers_.size(); }
  std::size_t patent_count() const { return patents_.size(); }
  std::size_t researcher_count() const { return researchers_.size(); }
  std::size_t paper_citation_count() const { return paper_citation_count_; }
  std::size_t paper_patent_citation_count() const { return paper_patent_citation_count_; }

  const Paper& paper(Index i) const { return papers_[i]; }
  const Patent& patent(Index i) const { return patents_[i]; }
  const Researcher& researcher(Index i) const { return researchers_[i]; }
  std::span<const Paper> papers() const { return papers_; }
  std::span<const Patent> patents() const { return patents_; }
  std::span<const Researcher> researchers() const { return researchers_; }

  std::optional<Index> find_paper(std::string_view id) const;
  std::optional<Index> find_patent(std::string_view id) const;
  std::optional<Index> find_researcher(std::string_view id) const;
  Index paper_at(std::string_view id) const;       // throws ValidationError
  Index researcher_at(std::string_view id) const;  // throws ValidationError

  // Resolved, deduplicated adjacency.
  const std::vector<Index>& references(Index paper) const { return references_[paper]; }
  const std::vector<Index>& citers(Index paper) const { return citers_[paper]; }
  const std::vector<Index>& citing_patents(Index paper) const { return citing_patents_[paper]; }
  const std::vector<Index>& cited_papers(Index patent) const { return cited_papers_[patent]; }
  const std::vector<Index>& researcher_papers(Index r) const { return researcher_papers_[r]; }
  // Authors that resolve to known researchers; may be fewer than author_ids.
  const std::vector<Index>& paper_researchers(Index paper) const {
    return paper_researchers_[paper];
  }
  const std::vector<Index>& paper_fields(Index paper) const { return paper_fields_[paper]; }
  // Distinct CPC nodes carried by a patent, per level (0 section, 1 subsection, 2 group).
  const std::vector<Index>& patent_cpc_nodes(Index patent, int level) const {
    return patent_cpc_[patent][static_cast<std::size_t>(level)];
  }

  const Hierarchy& fields() const { return fields_; }
  const Hierarchy& cpc() const { return cpc_; }

  // Canonical serialization; equal corpora produce equal dumps.
  json snapshot() const;

 private:
  Corpus() = default;

  YearRange window_;
  IngestReport report_;
  std::vector<Paper> papers_;
  std::vector<Patent> patents_;
  std::vector<Researcher> researchers_;
  Hierarchy fields_;
  Hierarchy cpc_;
  std::unordered_map<std::string, Index> paper_by_id_;
  std::unordered_map<std::string, Index> patent_by_id_;
  std::unordered_map<std::string, Index> researcher_by_id_;
  std::vector<std::vector<Index>> references_;
  std::vector<std::vector<Index>> citers_;
  std::vector<std::vector<Index>> citing_patents_;
  std::vector<std::vector<Index>> cited_papers_;
  std::vector<std::vector<Index>> researcher_papers_;
  std::vector<std::vector<Index>> paper_researchers_;
  std::vector<std::vector<Index>> paper_fields_;
  std::vector<std::array<std::vector<Index>, 3>> patent_cpc_;
  std::size_t paper_citation_count_ = 0;
  std::size_t paper_patent_citation_count_ = 0;
};

// Predicate shared by metrics, layouts and server queries. Absent members
// do not constrain.
struct QueryFilter {
  std::optional<std::set<std::string>> researcher_ids;
  std::optional<YearRange> paper_year_range;
  std::optional<YearRange> patent_year_range;
  std::optional<std::set<std::string>> field_ids;
  std::optional<std::set<std::string>> cpc_prefixes;
  std::optional<double> min_patentability;

  bool empty() const;
  static QueryFilter from_json(const json& j);
  json to_json() const;
  // Conjunction; members present in both are intersected.
  QueryFilter conjoin(const QueryFilter& other) const;
};

// Per-paper patentability scores indexed by paper; nullopt outside the
// prediction window.
using PaperScores = std::vector<std::optional<double>>;

// Immutable projection of a corpus. Paper-patent and paper-paper links are
// visible only when both endpoints are.
class CorpusView {
 public:
  explicit CorpusView(std::shared_ptr<const Corpus> corpus);

  const Corpus& corpus() const { return *corpus_; }
  const std::shared_ptr<const Corpus>& corpus_ptr() const { return corpus_; }

  bool has_paper(Index i) const { return paper_mask_[i] != 0; }
  bool has_patent(Index i) const { return patent_mask_[i] != 0; }
  bool has_researcher(Index i) const { return researcher_mask_[i] != 0; }
  const std::vector<Index>& papers() const { return papers_; }
  const std::vector<Index>& patents() const { return patents_; }
  const std::vector<Index>& researchers() const { return researchers_; }

  std::vector<Index> references(Index paper) const;
  std::vector<Index> citers(Index paper) const;
  std::vector<Index> citing_patents(Index paper) const;
  std::vector<Index> cited_papers(Index patent) const;
  std::vector<Index> researcher_papers(Index researcher) const;
  std::size_t paper_patent_citation_count() const;

  bool operator==(const CorpusView& other) const;

 private:
  friend CorpusView filter_view(const CorpusView&, const QueryFilter&, const PaperScores*);
  void rebuild_lists();

  std::shared_ptr<const Corpus> corpus_;
  std::vector<std::uint8_t> paper_mask_;
  std::vector<std::uint8_t> patent_mask_;
  std::vector<std::uint8_t> researcher_mask_;
  std::vector<Index> papers_;
  std::vector<Index> patents_;
  std::vector<Index> researchers_;
};

// Throws ValidationError when the filter names unknown ids, has an inverted
// range, or asks for min_patentability without scores.
void validate_filter(const Corpus& corpus, const QueryFilter& filter);

CorpusView filter_view(const CorpusView& view, const QueryFilter& filter,
                       const PaperScores* patentability = nullptr);

// Researchers owning at least one paper cited by a patent.
std::set<std::string> researchers_with_patent_impact(const Corpus& corpus);

// Papers tagged with `field` or any of its descendants.
bool paper_in_field(const Corpus& corpus, Index paper, Index field);
// Patents carrying `node` at any CPC level.
bool patent_has_cpc(const Corpus& corpus, Index patent, Index node);

}  // namespace sciflow
