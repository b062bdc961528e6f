#ifndef EWI_MATRIX_IO_HPP
#define EWI_MATRIX_IO_HPP

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ewi/day_series.hpp"
#include "ewi/evaluation.hpp"
#include "ewi/indicator.hpp"
#include "ewi/ledger.hpp"
#include "ewi/pipeline.hpp"
#include "ewi/volatility.hpp"

namespace ewi::io {

// Binary matrix dump: 8-byte magic "EWIMATRX", u64 rows, u64 cols, then
// row-major doubles in native byte order.
void save_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

// Text twin: one row per line, tab-separated, %.17g so values round-trip.
void save_matrix_tsv(const std::filesystem::path& path,
                     const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix_tsv(const std::filesystem::path& path);

// Evolution matrix directory: X.bin plus rows.tsv / days.tsv sidecars and a
// meta.json naming the encoding.
void save_evolution(const std::filesystem::path& dir, const EvolutionMatrix& x);
EvolutionMatrix load_evolution(const std::filesystem::path& dir);

// OHLC table with columns day, open, high, low, close (tab or comma
// separated, optional header). The day column is either an integer day index
// or an ISO date; dates require `epoch` (ISO date of day 0).
std::vector<OhlcBar> read_ohlc(const std::filesystem::path& path,
                               const std::optional<std::string>& epoch = {});
void write_ohlc(const std::filesystem::path& path,
                std::span<const OhlcBar> bars);

// "day<TAB>value" tables, shared by score, label, and series files.
void save_day_values(const std::filesystem::path& path,
                     std::span<const int> days,
                     std::span<const double> values);
std::vector<std::pair<int, double>> load_day_values(
    const std::filesystem::path& path);

void save_day_series(const std::filesystem::path& path, const DaySeries& s);
DaySeries load_day_series(const std::filesystem::path& path);

void save_scores(const std::filesystem::path& path, const ScoredLabels& sl);
void save_labels(const std::filesystem::path& path, const ScoredLabels& sl);
void save_labels(const std::filesystem::path& path,
                 const GroundTruthLabels& gt);

// Joins a scores file with a labels file on the day column; every scored day
// must be labeled.
ScoredLabels load_scored(const std::filesystem::path& scores_path,
                         const std::filesystem::path& labels_path);

// Curve export: threshold, x, y per line.
void save_curve(const std::filesystem::path& path, const Curve& c);

// Ordered key-value summary, one "key<TAB>value" line each.
void save_metrics(const std::filesystem::path& path,
                  std::span<const std::pair<std::string, std::string>> kv);

// Self-describing model archive (JSON, format tag "ewi-model/1") carrying the
// factor basis, lag coefficients, hyperparameters, and the training window.
struct ModelArchive {
  EwiModel model;
  DayRange train_days;  // [begin, end) day interval the model was fit on
};
void save_model(const std::filesystem::path& path, const ModelArchive& m);
ModelArchive load_model(const std::filesystem::path& path);

// Sweep results as a headered TSV, one row per grid cell.
void save_sweep_table(const std::filesystem::path& path, const SweepTable& t);
SweepTable load_sweep_table(const std::filesystem::path& path);

// FNV-1a 64-bit content hashes, used by run manifests.
std::uint64_t fnv1a(std::span<const unsigned char> bytes);
std::uint64_t fnv1a_file(const std::filesystem::path& path);

}  // namespace ewi::io

#endif  // EWI_MATRIX_IO_HPP
