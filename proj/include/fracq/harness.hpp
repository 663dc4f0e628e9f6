#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fracq/estimate.hpp"
#include "fracq/sim.hpp"

namespace fracq::harness {

inline constexpr const char* schema_version = "1";

struct GridCell {
  double alpha;
  double lambda;
  double mu;
};

struct ExperimentConfig {
  estimate::Model model = estimate::Model::mm1;
  std::vector<GridCell> grid;
  std::vector<std::size_t> sample_sizes{100, 1000, 10000};
  std::size_t replicates = 1000;
  double level = 0.95;
  std::uint64_t seed = 20130813;
  unsigned threads = 0;  // 0: hardware concurrency
  bool exclude_zero_state = false;
  void validate() const;
};

// Sojourn sample matching the regression design of the linear birth-death
// estimators: one Mittag-Leffler(alpha, theta k) sojourn per state k = 1..n
// (the path of a pure-birth realization visits exactly these states), with
// event types drawn Bernoulli(lambda/theta).
sim::SojournData generate_linear_bd_sample(const GridCell& cell, std::size_t n,
                                           rng::RngStream& stream);

// IID Mittag-Leffler(alpha, theta) sojourn sample for the M/M/1 estimators,
// produced by simulating the queue from initial state n so the boundary is
// never touched within n events.
sim::SojournData generate_mm1_sample(const GridCell& cell, std::size_t n,
                                     rng::RngStream& stream);

// Percent bias and coefficient of variation of the point estimators over the
// replicate ensemble. cv is absent when fewer than two replicates succeeded.
struct BiasCvRow {
  GridCell cell;
  std::size_t n;
  std::string estimator;  // "alpha", "lambda", "mu"
  double bias_percent;
  std::optional<double> cv_percent;
  std::size_t replicates;
  std::size_t failures;
};

struct BiasCvTable {
  ExperimentConfig config;
  std::vector<BiasCvRow> rows;
};

BiasCvTable run_bias_cv_experiment(const ExperimentConfig& config);

struct CoverageRow {
  GridCell cell;
  std::size_t n;
  double coverage_lambda;
  double coverage_mu;
  std::size_t replicates;
  std::size_t failures;
};

struct CoverageTable {
  ExperimentConfig config;
  std::vector<CoverageRow> rows;
};

CoverageTable run_coverage_experiment(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Financial-series ingestion.
// ---------------------------------------------------------------------------

struct Observation {
  long day_ordinal;      // days since 1970-01-01 (proleptic Gregorian)
  std::string date_iso;  // as parsed
  double value;
};

struct FinancialSeries {
  std::vector<Observation> observations;
  std::string sampling_interval = "interval";  // unit label, e.g. "month"
};

// Parses `date,value` CSV (ISO-8601 dates, YYYY-MM accepted as the first of
// the month), sorts by date and validates strict monotonicity. Parse problems
// report the offending line number.
FinancialSeries ingest_series(std::istream& in,
                              const std::string& interval_label = "interval");
FinancialSeries ingest_series_file(const std::string& path,
                                   const std::string& interval_label = "interval");

// Signed index changes become events: positive -> birth, negative -> death,
// zero -> dropped with the elapsed time folded into the next event's sojourn.
// Durations count sampling intervals. The pipeline has no queue-state notion,
// so state_before is recorded as 1 throughout.
struct SeriesSojourns {
  sim::SojournData data;
  std::size_t zero_changes_dropped = 0;
};
SeriesSojourns series_to_sojourns(const FinancialSeries& series);

// ---------------------------------------------------------------------------
// Serialization. All numeric output is '.'-decimal with 17 significant digits
// so identical configurations reproduce byte-identical files.
// ---------------------------------------------------------------------------

std::string format_double(double v);

void write_bias_cv_csv(const BiasCvTable& table, std::ostream& out);
std::string bias_cv_json(const BiasCvTable& table);
void write_coverage_csv(const CoverageTable& table, std::ostream& out);
std::string coverage_json(const CoverageTable& table);

void write_sojourns_csv(const sim::SojournData& data, std::ostream& out);
sim::SojournData read_sojourns_csv(std::istream& in);

std::string estimation_json(const estimate::EstimationResult& est);
void write_estimation_csv(const estimate::EstimationResult& est, std::ostream& out);

struct TransientRow {
  long k;
  double t;
  double probability;
  std::size_t terms_used;
};
void write_transient_csv(const std::vector<TransientRow>& rows, std::ostream& out);
std::string transient_json(const std::vector<TransientRow>& rows);

}  // namespace fracq::harness
