#pragma once

// Interplay graph data model: the paper matrix (field columns x citation
// range rows), the CPC icicle, citation flows between them, and the
// horizontal placement of field columns.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sciflow/corpus.hpp"
#include "sciflow/metrics.hpp"
#include "sciflow/predictor.hpp"

namespace sciflow {

inline constexpr int kGlyphAxes = 6;
inline constexpr std::array<const char*, kGlyphAxes> kGlyphNames = {
    "team_size", "institution_count", "grant_count", "science_citation_5y", "disruption",
    "novelty"};

// Lower bounds of the citation-count rows, e.g. {0, 1, 3, 8, 21} for
// {0}, [1,2], [3,7], [8,20], [21,inf).
std::vector<int> default_bins();
std::vector<int> parse_bins(std::string_view text);
void validate_bins(std::span<const int> bins);
// Row index of `count` under `bins`.
int bin_of(std::span<const int> bins, int count);
// Merges row `row` with row `row + 1`.
std::vector<int> merge_bins(std::span<const int> bins, int row);

// Column id for papers without a field at the requested level.
inline constexpr const char* kUnassignedColumn = "";

struct MatrixColumn {
  std::string field_id;
  std::string label;
  double diversity = 0.0;
  std::uint64_t total_citations = 0;  // (patent, paper) pairs over the column's papers
};

struct MatrixCell {
  std::size_t column = 0;
  int row = 0;
  std::vector<std::string> paper_ids;  // sorted
  double mean_patent_citation = 0.0;
  // Per-axis median of globally min-max normalized values; nullopt when no
  // paper in the cell has the metric.
  std::array<std::optional<double>, kGlyphAxes> glyph;

  std::size_t count() const { return paper_ids.size(); }
};

struct PaperMatrix {
  int level = 1;
  std::vector<int> bins;
  std::vector<MatrixColumn> columns;  // sorted by field id, unassigned last
  std::vector<MatrixCell> cells;      // nonempty cells, by (column, row)
  std::vector<std::pair<Index, std::pair<std::size_t, int>>> placement;  // paper -> (column, row)

  std::size_t paper_count() const;
  const MatrixCell* cell(std::size_t column, int row) const;
};

// Primary field of a paper at `level`: ancestor of its deepest tag (smallest
// id among equally deep tags); nullopt when it has no tag that deep.
std::optional<Index> primary_field(const Corpus& corpus, Index paper, int level);

PaperMatrix build_matrix(const CorpusView& view, int level, std::span<const int> bins,
                         const MetricsTable& metrics);

struct IcicleNode {
  std::string id;
  std::string label;
  int level = 0;
  std::optional<std::size_t> parent;  // index into PatentIcicle::nodes
  std::uint64_t count = 0;            // distinct patents
};

struct PatentIcicle {
  std::vector<IcicleNode> nodes;  // preorder, children by id

  // Group-level nodes in display order.
  std::vector<std::size_t> groups() const;
  // Group centers on a unit grid centered at 0, in display order.
  std::vector<double> group_positions() const;
};

PatentIcicle build_icicle(const CorpusView& view);

enum class FlowMode { Historical, Prediction };
std::string_view to_string(FlowMode m);
FlowMode flow_mode_from_string(std::string_view s);

struct CellFlow {
  std::size_t column = 0;
  int row = 0;
  std::string group;
  std::uint64_t weight = 0;
};

struct ColumnFlow {
  std::size_t column = 0;
  std::string group;
  std::uint64_t weight = 0;
};

struct FlowSet {
  FlowMode mode = FlowMode::Historical;
  std::vector<CellFlow> cell_edges;      // by (column, row, group)
  std::vector<ColumnFlow> column_edges;  // by (column, group)

  std::uint64_t group_total(std::string_view group) const;
};

// Historical: one unit per (patent, paper, group code of the patent).
// Prediction: one unit per prediction row with percentile >= min_percentile.
FlowSet build_flows(const PaperMatrix& matrix, const CorpusView& view, FlowMode mode,
                    const PatentabilityTable* predictions = nullptr, double min_percentile = 0.0);

// Cosine similarity of per-group flow vectors between columns; 0 when either
// vector is zero.
Eigen::MatrixXd field_similarity(const PaperMatrix& matrix, const FlowSet& flows);

// Unit-grid positions: largest total at 0, then +1, -1, +2, -2, ...; ties by id.
std::vector<double> target_order(std::span<const std::uint64_t> totals,
                                 std::span<const std::string> ids);

struct LayoutWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
};

struct LayoutSolution {
  std::vector<double> x;
  std::vector<std::size_t> ordering;  // left to right
  double objective = 0.0;
  LayoutWeights weights;
};

double layout_objective(const Eigen::MatrixXd& w, std::span<const double> target,
                        std::span<const double> patent_x, const LayoutWeights& weights,
                        std::span<const double> x);

// Exact minimizer of
//   α Σ_{i<j} w_ij (x_i - x_j)² + β Σ_i (x_i - t_i)² + γ Σ_i Σ_j (x_i - p_j)²
// via its stationarity system. Throws when the objective is not strictly
// convex (negative weights, or β = 0 and γ·|p| = 0).
LayoutSolution solve_layout(const Eigen::MatrixXd& w, std::span<const double> target,
                            std::span<const double> patent_x, const LayoutWeights& weights,
                            std::span<const std::string> ids);

enum class TimelineKind { Paper, Patent };
TimelineKind timeline_kind_from_string(std::string_view s);

struct FieldTimeline {
  TimelineKind kind = TimelineKind::Paper;
  YearRange years;
  std::vector<std::pair<std::string, std::vector<std::uint64_t>>> series;  // id -> count per year

  json to_json() const;
};

// Paper kind counts papers by year tagged with the field (or a descendant);
// patent kind counts patents by application year carrying the CPC node.
FieldTimeline field_timeline(const CorpusView& view, std::span<const std::string> ids,
                             TimelineKind kind);

struct InterplayRequest {
  QueryFilter filter;
  int level = 1;
  std::vector<int> bins = default_bins();
  LayoutWeights weights;
  FlowMode mode = FlowMode::Historical;
  double min_percentile = 0.0;

  json to_json() const;
};

struct InterplayLayout {
  PaperMatrix matrix;
  PatentIcicle icicle;
  FlowSet flows;
  std::vector<double> target_x;
  std::vector<double> patent_x;
  LayoutSolution solution;
  FieldTimeline timelines;
};

InterplayLayout build_interplay(const CorpusView& view, const MetricsTable& metrics,
                                const PatentabilityTable* predictions,
                                const InterplayRequest& request);

// The layout.json payload.
json interplay_to_json(const InterplayLayout& layout, const Corpus& corpus,
                       const InterplayRequest& request);

}  // namespace sciflow
