#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "avtpids/types.hpp"

namespace avtpids {

// ---------------------------------------------------------------------------
// One-class SVM with RBF kernel, trained by solving the nu-parameterised
// one-class dual: minimise ½ αᵀQα over 0 ≤ α_i ≤ 1/(ν·n), Σα_i = 1, with
// Q_ij = exp(−γ‖x_i − x_j‖²).  Lower scores are more anomalous.
// ---------------------------------------------------------------------------

struct OcsvmModel {
  FloatMatrix support_vectors;      // rows with α_i > 0, in training order
  std::vector<double> coefficients; // α_i per support vector; Σ = 1
  double rho = 0.0;                 // decision offset
  double gamma = 0.0;               // RBF width
  double nu = 0.0;                  // fraction parameter used at fit time
  bool degenerate = false;          // all training points identical
  bool converged = true;            // optimiser reached the KKT tolerance

  std::size_t dims() const { return support_vectors.cols; }
};

struct OcsvmOptions {
  double tolerance = 1e-6;          // KKT stopping tolerance on the dual
  std::size_t max_iterations = 0;   // 0 = automatic (scales with n)
  std::size_t subsample_cap = 10000;// fit on at most this many rows
  std::uint64_t subsample_seed = 1; // seed for the uniform subsample
};

// Heuristic kernel width 1/(d · var), where var is the variance of all
// matrix entries pooled together.  Falls back to 1/d for constant data.
double ocsvm_default_gamma(const FloatMatrix& x);

// Fits the one-class SVM.  Requires n ≥ 2 rows, ν ∈ (0,1], γ > 0.  When X
// has more rows than options.subsample_cap, a seeded uniform subsample of
// that size is used.  Throws InvalidArgumentError on domain violations.
OcsvmModel ocsvm_fit(const FloatMatrix& x, double nu, double gamma,
                     const OcsvmOptions& options = {});

// Decision value d(x) = Σ α_i K(s_i, x) − ρ; negative means anomalous.
double ocsvm_score(const OcsvmModel& model, std::span<const double> x);

// Decision values for every row of x.
std::vector<double> ocsvm_scores(const OcsvmModel& model, const FloatMatrix& x);

// ½ αᵀQα of the fitted coefficients; used to compare against reference
// solvers on small instances.
double ocsvm_objective(const OcsvmModel& model);

// ---------------------------------------------------------------------------
// Local outlier factor.  Scores near 1 are inliers; larger is more
// anomalous.  Neighbourhoods use exactly k neighbours with distance ties
// broken by smaller row index.
// ---------------------------------------------------------------------------

struct LofModel {
  FloatMatrix points;               // training rows
  std::size_t k = 0;                // neighbour count, 1 ≤ k < n
  std::vector<double> k_distance;   // distance to the k-th nearest neighbour
  std::vector<std::vector<std::size_t>> neighbors;  // k indices per point
  std::vector<double> lrd;          // local reachability density (may be +inf)

  std::size_t size() const { return points.rows; }
  std::size_t dims() const { return points.cols; }
};

// Precomputes neighbourhoods, k-distances, and local reachability
// densities.  Requires 1 ≤ k < n.  A zero reachability sum (a point
// surrounded by k duplicates) yields lrd = +inf.
LofModel lof_fit(const FloatMatrix& x, std::size_t k);

// Novelty score of a query point against the training set: the mean of
// lrd(neighbour)/lrd(query) over the query's k nearest training points.
// Queries with infinite lrd score exactly 1.
double lof_score(const LofModel& model, std::span<const double> x);

// Novelty scores for every row of x.
std::vector<double> lof_scores(const LofModel& model, const FloatMatrix& x);

// Classic training-set factors: each training point scored against the
// others (itself excluded), using the precomputed neighbourhoods.
std::vector<double> lof_train_scores(const LofModel& model);

// ---------------------------------------------------------------------------
// Isolation forest.  Scores in (0,1); higher is more anomalous.
// ---------------------------------------------------------------------------

struct IsoNode {
  std::int32_t attr = -1;   // split attribute; −1 marks a leaf
  double split = 0.0;       // go left when x[attr] < split
  std::int32_t left = -1;   // child node indices within the tree
  std::int32_t right = -1;
  std::uint64_t size = 0;   // training points that reached this node
};

struct IsoTree {
  std::vector<IsoNode> nodes;  // nodes[0] is the root
};

struct IsoForest {
  std::vector<IsoTree> trees;
  std::size_t psi = 0;       // per-tree subsample size
  std::uint64_t seed = 0;
  std::size_t dims = 0;
};

// Average unsuccessful-search path length in a binary search tree of m
// points: c(m) = 2·H(m−1) − 2(m−1)/m with H the exact harmonic number;
// c(0) = c(1) = 0.
double iforest_c(std::size_t m);

// Builds n_trees isolation trees, each on an independent seeded subsample
// of ψ rows drawn without replacement.  Requires 2 ≤ ψ ≤ n and
// n_trees ≥ 1.  Tree depth is capped at ⌈log2 ψ⌉; splits skip attributes
// that are constant within a node's sample.
IsoForest iforest_fit(const FloatMatrix& x, std::size_t n_trees,
                      std::size_t psi, std::uint64_t seed);

// Mean path length E[h(x)] over the forest, including the c(leaf size)
// adjustment at external nodes.
double iforest_avg_path(const IsoForest& model, std::span<const double> x);

// Anomaly score s(x) = 2^(−E[h(x)]/c(ψ)).
double iforest_score(const IsoForest& model, std::span<const double> x);

// Scores for every row of x.
std::vector<double> iforest_scores(const IsoForest& model, const FloatMatrix& x);

// ---------------------------------------------------------------------------
// Score binarisation shared by the classical detectors.
// ---------------------------------------------------------------------------

// Which side of the threshold is anomalous for a given detector's scores.
enum class ScoreDirection {
  kLowAnomalous,   // one-class SVM: predict 1 when score < threshold
  kHighAnomalous,  // LOF / isolation forest: predict 1 when score > threshold
};

struct ThresholdResult {
  double threshold = 0.0;
  double f1 = 0.0;
  ScoreDirection direction = ScoreDirection::kHighAnomalous;
};

// Exhaustively scans cuts over the given validation scores and returns the
// one maximising F1 (positive class = label 1).  Ties keep the cut that
// predicts fewer anomalies.  All-identical scores yield a cut labelling
// everything normal.  Throws InvalidArgumentError when sizes mismatch,
// the set is empty, or only one class is present.
ThresholdResult classical_threshold(const std::vector<double>& scores,
                                    const std::vector<std::uint8_t>& labels,
                                    ScoreDirection direction);

// Predictions (0/1) for scores under a direction-aware threshold; the
// comparison is strict, so a score equal to the threshold is normal.
std::vector<std::uint8_t> apply_threshold(const std::vector<double>& scores,
                                          double threshold,
                                          ScoreDirection direction);

// ---------------------------------------------------------------------------
// Checkpointing: the same container family as model checkpoints (magic,
// version, JSON header, raw little-endian payload).
// ---------------------------------------------------------------------------

void save_ocsvm(const OcsvmModel& model, const std::filesystem::path& path);
OcsvmModel load_ocsvm(const std::filesystem::path& path);

void save_lof(const LofModel& model, const std::filesystem::path& path);
LofModel load_lof(const std::filesystem::path& path);

void save_iforest(const IsoForest& model, const std::filesystem::path& path);
IsoForest load_iforest(const std::filesystem::path& path);

}  // namespace avtpids
