#include "avtpids/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <list>
#include <random>
#include <unordered_map>
#include <utility>

#include "avtpids/errors.hpp"
#include "json.hpp"

namespace avtpids {

namespace {

constexpr char kDetectorMagic[8] = {'A', 'V', 'T', 'P', 'D', 'T', 'C', 'T'};
constexpr std::uint32_t kDetectorVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_matrix(const FloatMatrix& x, const char* what) {
  if (x.rows == 0 || x.cols == 0) {
    throw InvalidArgumentError(std::string(what) + " must be non-empty");
  }
  if (x.data.size() != x.rows * x.cols) {
    throw DimensionError(std::string(what) + " storage does not match rows*cols");
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) {
      throw InvalidArgumentError(std::string(what) + " contains non-finite values");
    }
  }
}

const double* row_ptr(const FloatMatrix& x, std::size_t r) {
  return x.data.data() + r * x.cols;
}

double sq_dist(const double* a, const double* b, std::size_t d) {
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double t = a[i] - b[i];
    acc += t * t;
  }
  return acc;
}

double euclid(const double* a, const double* b, std::size_t d) {
  return std::sqrt(sq_dist(a, b, d));
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform subsample of `take` distinct indices out of [0, n), ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t take,
                                        std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Rows of the RBF Gram matrix computed on demand with a bounded LRU cache;
// the dual solver touches a small working set of rows many times.
class KernelRowCache {
 public:
  KernelRowCache(const FloatMatrix& x, double gamma, std::size_t budget_bytes)
      : x_(x), gamma_(gamma) {
    const std::size_t row_bytes = x.rows * sizeof(double);
    budget_rows_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(row_bytes, 1));
  }

  const std::vector<double>& row(std::size_t i) {
    auto it = rows_.find(i);
    if (it != rows_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (rows_.size() >= budget_rows_) {
      rows_.erase(lru_.back());
      lru_.pop_back();
    }
    std::vector<double> r(x_.rows);
    const double* a = row_ptr(x_, i);
    for (std::size_t j = 0; j < x_.rows; ++j) {
      r[j] = std::exp(-gamma_ * sq_dist(a, row_ptr(x_, j), x_.cols));
    }
    lru_.push_front(i);
    auto [pos, inserted] = rows_.emplace(i, std::make_pair(std::move(r), lru_.begin()));
    return pos->second.first;
  }

 private:
  const FloatMatrix& x_;
  double gamma_;
  std::size_t budget_rows_ = 2;
  std::list<std::size_t> lru_;
  std::unordered_map<std::size_t,
                     std::pair<std::vector<double>, std::list<std::size_t>::iterator>>
      rows_;
};

double f1_of_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const double p = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double r = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

void write_exact(std::ofstream& out, const void* data, std::size_t len) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

void read_exact(std::ifstream& in, void* data, std::size_t len, const char* what) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(len));
  if (static_cast<std::size_t>(in.gcount()) != len) {
    throw FormatError(std::string("detector checkpoint truncated while reading ") + what);
  }
}

std::ofstream open_checkpoint_out(const std::filesystem::path& path,
                                  const nlohmann::json& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_exact(out, kDetectorMagic, sizeof(kDetectorMagic));
  const std::uint32_t version = kDetectorVersion;
  write_exact(out, &version, sizeof(version));
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();
  write_exact(out, &header_len, sizeof(header_len));
  write_exact(out, text.data(), text.size());
  return out;
}

nlohmann::json open_checkpoint_in(std::ifstream& in, const std::filesystem::path& path,
                                  const char* expect_type) {
  char magic[8];
  read_exact(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kDetectorMagic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + " is not a detector checkpoint");
  }
  std::uint32_t version = 0;
  read_exact(in, &version, sizeof(version), "version");
  if (version != kDetectorVersion) {
    throw FormatError("unsupported detector checkpoint version " + std::to_string(version));
  }
  std::uint64_t header_len = 0;
  read_exact(in, &header_len, sizeof(header_len), "header length");
  if (header_len == 0 || header_len > (1u << 24)) {
    throw FormatError("implausible detector checkpoint header length");
  }
  std::string text(header_len, '\0');
  read_exact(in, text.data(), header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("corrupt detector checkpoint header: ") + e.what());
  }
  const std::string type = header.at("type").get<std::string>();
  if (type != expect_type) {
    throw FormatError(path.string() + " holds a '" + type + "' model, expected '" +
                      expect_type + "'");
  }
  return header;
}

void read_doubles(std::ifstream& in, std::vector<double>& out, std::size_t count,
                  const char* what) {
  out.resize(count);
  read_exact(in, out.data(), count * sizeof(double), what);
}

}  // namespace

// ---------------------------------------------------------------------------
// One-class SVM
// ---------------------------------------------------------------------------

double ocsvm_default_gamma(const FloatMatrix& x) {
  check_matrix(x, "gamma heuristic input");
  double mean = 0.0;
  for (double v : x.data) mean += v;
  mean /= static_cast<double>(x.data.size());
  double var = 0.0;
  for (double v : x.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.data.size());
  if (!(var > 0.0)) return 1.0 / static_cast<double>(x.cols);
  return 1.0 / (static_cast<double>(x.cols) * var);
}

OcsvmModel ocsvm_fit(const FloatMatrix& x, double nu, double gamma,
                     const OcsvmOptions& options) {
  check_matrix(x, "one-class SVM training matrix");
  if (x.rows < 2) throw InvalidArgumentError("one-class SVM needs at least 2 rows");
  if (!(nu > 0.0) || nu > 1.0) throw InvalidArgumentError("nu must lie in (0, 1]");
  if (!(gamma > 0.0)) throw InvalidArgumentError("gamma must be positive");
  if (!(options.tolerance > 0.0)) throw InvalidArgumentError("tolerance must be positive");

  // Kernel QP cost is quadratic in n; large inputs are fit on a seeded
  // uniform subsample.
  FloatMatrix sub;
  const FloatMatrix* train = &x;
  const std::size_t cap = std::max<std::size_t>(options.subsample_cap, 2);
  if (options.subsample_cap > 0 && x.rows > cap) {
    const auto pick = sample_indices(x.rows, cap, options.subsample_seed);
    sub.rows = pick.size();
    sub.cols = x.cols;
    sub.data.reserve(sub.rows * sub.cols);
    for (std::size_t r : pick) {
      sub.data.insert(sub.data.end(), row_ptr(x, r), row_ptr(x, r) + x.cols);
    }
    train = &sub;
  }

  const std::size_t n = train->rows;
  const std::size_t d = train->cols;
  const double C = 1.0 / (nu * static_cast<double>(n));

  bool degenerate = true;
  for (std::size_t r = 1; r < n && degenerate; ++r) {
    degenerate = std::memcmp(row_ptr(*train, r), row_ptr(*train, 0),
                             d * sizeof(double)) == 0;
  }

  // Feasible start: the first floor(nu*n) coefficients sit at the cap, one
  // carries the remainder, so that the coefficients sum to exactly 1.
  std::vector<double> alpha(n, 0.0);
  const std::size_t nfull =
      std::min(n, static_cast<std::size_t>(nu * static_cast<double>(n)));
  for (std::size_t i = 0; i < nfull; ++i) alpha[i] = C;
  if (nfull < n) alpha[nfull] = 1.0 - C * static_cast<double>(nfull);

  enum Status : std::uint8_t { kLower, kFree, kUpper };
  auto status_of = [C](double a) {
    return a >= C ? kUpper : (a <= 0.0 ? kLower : kFree);
  };
  std::vector<std::uint8_t> status(n);
  for (std::size_t i = 0; i < n; ++i) status[i] = status_of(alpha[i]);

  KernelRowCache cache(*train, gamma, static_cast<std::size_t>(256) << 20);

  std::vector<double> grad(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (alpha[j] <= 0.0) continue;
    const auto& kj = cache.row(j);
    for (std::size_t t = 0; t < n; ++t) grad[t] += alpha[j] * kj[t];
  }

  const std::size_t max_iter =
      options.max_iterations > 0
          ? options.max_iterations
          : std::max<std::size_t>(10'000'000, 100 * n);
  bool converged = false;

  // Sequential minimal optimisation with second-order working-set
  // selection on the pair constraint sum(alpha) = 1.
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    double gmax = -kInf;
    std::ptrdiff_t i = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (status[t] != kUpper && -grad[t] >= gmax) {
        gmax = -grad[t];
        i = static_cast<std::ptrdiff_t>(t);
      }
    }
    double gmax2 = -kInf;
    for (std::size_t t = 0; t < n; ++t) {
      if (status[t] != kLower && grad[t] > gmax2) gmax2 = grad[t];
    }
    if (i < 0 || gmax + gmax2 < options.tolerance) {
      converged = true;
      break;
    }

    const std::vector<double> row_i = cache.row(static_cast<std::size_t>(i));
    double obj_min = kInf;
    std::ptrdiff_t j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (status[t] == kLower) continue;
      const double grad_diff = gmax + grad[t];
      if (grad_diff > 0.0) {
        double quad = 2.0 - 2.0 * row_i[t];  // K(i,i) = K(t,t) = 1 for RBF
        if (quad <= 0.0) quad = 1e-12;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= obj_min) {
          obj_min = obj;
          j = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
    if (j < 0) {
      converged = true;
      break;
    }

    const std::size_t ii = static_cast<std::size_t>(i);
    const std::size_t jj = static_cast<std::size_t>(j);
    const auto& row_j = cache.row(jj);
    double quad = 2.0 - 2.0 * row_i[jj];
    if (quad <= 0.0) quad = 1e-12;

    const double old_ai = alpha[ii];
    const double old_aj = alpha[jj];
    const double sum = old_ai + old_aj;
    const double delta = (grad[ii] - grad[jj]) / quad;
    alpha[ii] -= delta;
    alpha[jj] += delta;
    // Clip onto the box while preserving alpha_i + alpha_j exactly.
    if (sum > C) {
      if (alpha[ii] > C) { alpha[ii] = C; alpha[jj] = sum - C; }
    } else {
      if (alpha[jj] < 0.0) { alpha[jj] = 0.0; alpha[ii] = sum; }
    }
    if (sum > C) {
      if (alpha[jj] > C) { alpha[jj] = C; alpha[ii] = sum - C; }
    } else {
      if (alpha[ii] < 0.0) { alpha[ii] = 0.0; alpha[jj] = sum; }
    }
    status[ii] = status_of(alpha[ii]);
    status[jj] = status_of(alpha[jj]);

    const double dai = alpha[ii] - old_ai;
    const double daj = alpha[jj] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += row_i[t] * dai + row_j[t] * daj;
    }
  }

  // Offset: free points sit exactly on the boundary; otherwise take the
  // midpoint of the bound-derived bracket.
  std::size_t nr_free = 0;
  double sum_free = 0.0;
  double ub = kInf;
  double lb = -kInf;
  for (std::size_t t = 0; t < n; ++t) {
    if (status[t] == kUpper) {
      lb = std::max(lb, grad[t]);
    } else if (status[t] == kLower) {
      ub = std::min(ub, grad[t]);
    } else {
      ++nr_free;
      sum_free += grad[t];
    }
  }
  double rho;
  if (nr_free > 0) {
    rho = sum_free / static_cast<double>(nr_free);
  } else if (std::isinf(ub) && std::isinf(lb)) {
    rho = 0.0;
  } else if (std::isinf(ub)) {
    rho = lb;
  } else if (std::isinf(lb)) {
    rho = ub;
  } else {
    rho = 0.5 * (ub + lb);
  }

  OcsvmModel model;
  model.gamma = gamma;
  model.nu = nu;
  model.rho = rho;
  model.degenerate = degenerate;
  model.converged = converged;
  std::size_t sv_count = 0;
  for (double a : alpha) sv_count += a > 0.0 ? 1 : 0;
  model.support_vectors.rows = sv_count;
  model.support_vectors.cols = d;
  model.support_vectors.data.reserve(sv_count * d);
  model.coefficients.reserve(sv_count);
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.coefficients.push_back(alpha[t]);
      model.support_vectors.data.insert(model.support_vectors.data.end(),
                                        row_ptr(*train, t), row_ptr(*train, t) + d);
    }
  }
  return model;
}

double ocsvm_score(const OcsvmModel& model, std::span<const double> x) {
  if (x.size() != model.dims()) {
    throw DimensionError("query has " + std::to_string(x.size()) +
                         " features, model expects " + std::to_string(model.dims()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < model.support_vectors.rows; ++i) {
    acc += model.coefficients[i] *
           std::exp(-model.gamma *
                    sq_dist(row_ptr(model.support_vectors, i), x.data(), x.size()));
  }
  return acc - model.rho;
}

std::vector<double> ocsvm_scores(const OcsvmModel& model, const FloatMatrix& x) {
  check_matrix(x, "one-class SVM query matrix");
  std::vector<double> out;
  out.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    out.push_back(ocsvm_score(model, {row_ptr(x, r), x.cols}));
  }
  return out;
}

double ocsvm_objective(const OcsvmModel& model) {
  const std::size_t m = model.support_vectors.rows;
  const std::size_t d = model.support_vectors.cols;
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      acc += model.coefficients[i] * model.coefficients[j] *
             std::exp(-model.gamma * sq_dist(row_ptr(model.support_vectors, i),
                                             row_ptr(model.support_vectors, j), d));
    }
  }
  return 0.5 * acc;
}

// ---------------------------------------------------------------------------
// Local outlier factor
// ---------------------------------------------------------------------------

namespace {

// Indices of the k nearest rows of `pts` to `q` (self excluded when
// `exclude` is in range), ascending by (distance, index); distances of the
// selected neighbours are written to `out_dist`.
std::vector<std::size_t> k_nearest(const FloatMatrix& pts, const double* q,
                                   std::size_t k, std::size_t exclude,
                                   std::vector<double>& scratch,
                                   std::vector<double>& out_dist) {
  const std::size_t n = pts.rows;
  scratch.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    scratch[j] = euclid(row_ptr(pts, j), q, pts.cols);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != exclude) order.push_back(j);
  }
  const auto cmp = [&scratch](std::size_t a, std::size_t b) {
    return scratch[a] < scratch[b] || (scratch[a] == scratch[b] && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.end(), cmp);
  order.resize(k);
  out_dist.resize(k);
  for (std::size_t t = 0; t < k; ++t) out_dist[t] = scratch[order[t]];
  return order;
}

}  // namespace

LofModel lof_fit(const FloatMatrix& x, std::size_t k) {
  check_matrix(x, "LOF training matrix");
  const std::size_t n = x.rows;
  if (k < 1 || k >= n) {
    throw InvalidArgumentError("LOF requires 1 <= k < n (k=" + std::to_string(k) +
                               ", n=" + std::to_string(n) + ")");
  }
  LofModel model;
  model.points = x;
  model.k = k;
  model.k_distance.resize(n);
  model.neighbors.resize(n);
  model.lrd.resize(n);

  std::vector<std::vector<double>> ndist(n);
  std::vector<double> scratch;
  for (std::size_t i = 0; i < n; ++i) {
    model.neighbors[i] = k_nearest(x, row_ptr(x, i), k, i, scratch, ndist[i]);
    model.k_distance[i] = ndist[i].back();
  }
  for (std::size_t i = 0; i < n; ++i) {
    double reach_sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) {
      reach_sum += std::max(model.k_distance[model.neighbors[i][t]], ndist[i][t]);
    }
    model.lrd[i] = reach_sum > 0.0 ? static_cast<double>(k) / reach_sum : kInf;
  }
  return model;
}

double lof_score(const LofModel& model, std::span<const double> x) {
  if (x.size() != model.dims()) {
    throw DimensionError("query has " + std::to_string(x.size()) +
                         " features, model expects " + std::to_string(model.dims()));
  }
  std::vector<double> scratch;
  std::vector<double> dist;
  const auto nn = k_nearest(model.points, x.data(), model.k, model.size(), scratch, dist);
  double reach_sum = 0.0;
  for (std::size_t t = 0; t < model.k; ++t) {
    reach_sum += std::max(model.k_distance[nn[t]], dist[t]);
  }
  if (!(reach_sum > 0.0)) return 1.0;  // surrounded by duplicates: inlier
  const double lrd_x = static_cast<double>(model.k) / reach_sum;
  double acc = 0.0;
  for (std::size_t o : nn) acc += model.lrd[o] / lrd_x;
  return acc / static_cast<double>(model.k);
}

std::vector<double> lof_scores(const LofModel& model, const FloatMatrix& x) {
  check_matrix(x, "LOF query matrix");
  std::vector<double> out;
  out.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    out.push_back(lof_score(model, {row_ptr(x, r), x.cols}));
  }
  return out;
}

std::vector<double> lof_train_scores(const LofModel& model) {
  std::vector<double> out(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (std::isinf(model.lrd[i])) {
      out[i] = 1.0;
      continue;
    }
    double acc = 0.0;
    for (std::size_t o : model.neighbors[i]) acc += model.lrd[o] / model.lrd[i];
    out[i] = acc / static_cast<double>(model.k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Isolation forest
// ---------------------------------------------------------------------------

double iforest_c(std::size_t m) {
  if (m < 2) return 0.0;
  double h = 0.0;
  for (std::size_t t = 1; t < m; ++t) h += 1.0 / static_cast<double>(t);
  return 2.0 * h -
         2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

namespace {

struct TreeBuilder {
  const FloatMatrix& x;
  std::mt19937_64& rng;
  std::size_t height_limit;
  std::vector<IsoNode> nodes;

  std::int32_t build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                     std::size_t depth) {
    const auto id = static_cast<std::int32_t>(nodes.size());
    nodes.emplace_back();
    nodes[static_cast<std::size_t>(id)].size = hi - lo;
    if (hi - lo <= 1 || depth >= height_limit) return id;

    // Split attributes must vary within this node's sample.
    std::vector<std::size_t> cands;
    std::vector<std::pair<double, double>> ranges(x.cols);
    for (std::size_t a = 0; a < x.cols; ++a) {
      double mn = x.at(idx[lo], a);
      double mx = mn;
      for (std::size_t t = lo + 1; t < hi; ++t) {
        const double v = x.at(idx[t], a);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      ranges[a] = {mn, mx};
      if (mx > mn) cands.push_back(a);
    }
    if (cands.empty()) return id;

    const std::size_t attr = cands[static_cast<std::size_t>(rng() % cands.size())];
    const auto [mn, mx] = ranges[attr];
    const double split = mn + (mx - mn) * unit_uniform(rng);
    const auto first = idx.begin() + static_cast<std::ptrdiff_t>(lo);
    const auto last = idx.begin() + static_cast<std::ptrdiff_t>(hi);
    const auto mid = std::stable_partition(
        first, last, [&](std::size_t r) { return x.at(r, attr) < split; });
    const auto left_count = static_cast<std::size_t>(mid - first);
    if (left_count == 0 || left_count == hi - lo) return id;  // nothing separated

    const std::int32_t left = build(idx, lo, lo + left_count, depth + 1);
    const std::int32_t right = build(idx, lo + left_count, hi, depth + 1);
    IsoNode& node = nodes[static_cast<std::size_t>(id)];
    node.attr = static_cast<std::int32_t>(attr);
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }
};

}  // namespace

IsoForest iforest_fit(const FloatMatrix& x, std::size_t n_trees, std::size_t psi,
                      std::uint64_t seed) {
  check_matrix(x, "isolation forest training matrix");
  if (n_trees < 1) throw InvalidArgumentError("isolation forest needs at least one tree");
  if (psi < 2 || psi > x.rows) {
    throw InvalidArgumentError("subsample size must satisfy 2 <= psi <= n (psi=" +
                               std::to_string(psi) + ", n=" + std::to_string(x.rows) + ")");
  }
  const auto height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(psi))));

  IsoForest forest;
  forest.psi = psi;
  forest.seed = seed;
  forest.dims = x.cols;
  forest.trees.reserve(n_trees);
  std::mt19937_64 master(seed);
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::mt19937_64 rng(master());
    std::vector<std::size_t> idx(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) idx[i] = i;
    for (std::size_t i = 0; i < psi; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (x.rows - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(psi);
    TreeBuilder builder{x, rng, height_limit, {}};
    builder.build(idx, 0, psi, 0);
    forest.trees.push_back(IsoTree{std::move(builder.nodes)});
  }
  return forest;
}

double iforest_avg_path(const IsoForest& model, std::span<const double> x) {
  if (model.trees.empty()) throw StateError("isolation forest has no trees");
  if (x.size() != model.dims) {
    throw DimensionError("query has " + std::to_string(x.size()) +
                         " features, model expects " + std::to_string(model.dims));
  }
  double acc = 0.0;
  for (const IsoTree& tree : model.trees) {
    std::size_t node = 0;
    double depth = 0.0;
    while (tree.nodes[node].attr >= 0) {
      const IsoNode& nd = tree.nodes[node];
      depth += 1.0;
      node = static_cast<std::size_t>(
          x[static_cast<std::size_t>(nd.attr)] < nd.split ? nd.left : nd.right);
    }
    acc += depth + iforest_c(tree.nodes[node].size);
  }
  return acc / static_cast<double>(model.trees.size());
}

double iforest_score(const IsoForest& model, std::span<const double> x) {
  return std::exp2(-iforest_avg_path(model, x) / iforest_c(model.psi));
}

std::vector<double> iforest_scores(const IsoForest& model, const FloatMatrix& x) {
  check_matrix(x, "isolation forest query matrix");
  std::vector<double> out;
  out.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    out.push_back(iforest_score(model, {row_ptr(x, r), x.cols}));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Threshold selection
// ---------------------------------------------------------------------------

ThresholdResult classical_threshold(const std::vector<double>& scores,
                                    const std::vector<std::uint8_t>& labels,
                                    ScoreDirection direction) {
  if (scores.size() != labels.size()) {
    throw InvalidArgumentError("scores and labels must have equal length");
  }
  if (scores.empty()) throw InvalidArgumentError("cannot pick a threshold from no scores");
  std::size_t positives = 0;
  for (std::uint8_t l : labels) positives += l != 0 ? 1 : 0;
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw InvalidArgumentError("threshold selection needs both classes present");
  }
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidArgumentError("scores contain NaN");
  }

  const std::size_t n = scores.size();
  std::vector<std::pair<double, std::uint8_t>> items(n);
  for (std::size_t i = 0; i < n; ++i) items[i] = {scores[i], labels[i] != 0 ? 1 : 0};
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  ThresholdResult best;
  best.direction = direction;
  best.f1 = 0.0;

  if (items.front().first == items.back().first) {
    // Uninformative scores: keep the cut that calls everything normal.
    best.threshold = items.front().first;
    return best;
  }

  std::size_t tp = 0;
  std::size_t fp = 0;
  const auto consider = [&](double threshold) {
    const double f = f1_of_counts(tp, fp, positives - tp);
    if (f > best.f1) {
      best.f1 = f;
      best.threshold = threshold;
    }
  };

  if (direction == ScoreDirection::kHighAnomalous) {
    // Scan cuts from "nothing anomalous" to "everything anomalous"; ties
    // keep the earlier (fewer-anomalies) cut.
    best.threshold = items.back().first;
    for (std::size_t i = n; i-- > 1;) {
      tp += items[i].second;
      fp += 1 - items[i].second;
      if (items[i - 1].first < items[i].first) consider(items[i - 1].first);
    }
    tp = positives;
    fp = negatives;
    consider(items.front().first - 1.0);
  } else {
    best.threshold = items.front().first;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      tp += items[i].second;
      fp += 1 - items[i].second;
      if (items[i].first < items[i + 1].first) consider(items[i + 1].first);
    }
    tp = positives;
    fp = negatives;
    consider(items.back().first + 1.0);
  }
  return best;
}

std::vector<std::uint8_t> apply_threshold(const std::vector<double>& scores,
                                          double threshold,
                                          ScoreDirection direction) {
  std::vector<std::uint8_t> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool anomalous = direction == ScoreDirection::kLowAnomalous
                               ? scores[i] < threshold
                               : scores[i] > threshold;
    out[i] = anomalous ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_ocsvm(const OcsvmModel& model, const std::filesystem::path& path) {
  if (model.support_vectors.rows == 0 ||
      model.coefficients.size() != model.support_vectors.rows) {
    throw InvalidArgumentError("one-class SVM model is incomplete");
  }
  nlohmann::json header;
  header["type"] = "ocsvm";
  header["rows"] = model.support_vectors.rows;
  header["cols"] = model.support_vectors.cols;
  header["nu"] = model.nu;
  header["gamma"] = model.gamma;
  header["rho"] = model.rho;
  header["degenerate"] = model.degenerate;
  header["converged"] = model.converged;
  auto out = open_checkpoint_out(path, header);
  write_exact(out, model.support_vectors.data.data(),
              model.support_vectors.data.size() * sizeof(double));
  write_exact(out, model.coefficients.data(), model.coefficients.size() * sizeof(double));
  out.flush();
  if (!out) throw IoError("failed writing detector checkpoint to " + path.string());
}

OcsvmModel load_ocsvm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open detector checkpoint " + path.string());
  const nlohmann::json header = open_checkpoint_in(in, path, "ocsvm");
  OcsvmModel model;
  model.support_vectors.rows = header.at("rows").get<std::size_t>();
  model.support_vectors.cols = header.at("cols").get<std::size_t>();
  model.nu = header.at("nu").get<double>();
  model.gamma = header.at("gamma").get<double>();
  model.rho = header.at("rho").get<double>();
  model.degenerate = header.at("degenerate").get<bool>();
  model.converged = header.at("converged").get<bool>();
  if (model.support_vectors.rows == 0 || model.support_vectors.cols == 0) {
    throw FormatError("one-class SVM checkpoint declares an empty model");
  }
  read_doubles(in, model.support_vectors.data,
               model.support_vectors.rows * model.support_vectors.cols,
               "support vectors");
  read_doubles(in, model.coefficients, model.support_vectors.rows, "coefficients");
  for (double v : model.support_vectors.data) {
    if (!std::isfinite(v)) throw FormatError("support vectors contain non-finite values");
  }
  for (double a : model.coefficients) {
    if (!std::isfinite(a) || a < 0.0) {
      throw FormatError("coefficients must be finite and non-negative");
    }
  }
  if (!std::isfinite(model.rho) || !(model.gamma > 0.0)) {
    throw FormatError("one-class SVM checkpoint has invalid rho/gamma");
  }
  return model;
}

void save_lof(const LofModel& model, const std::filesystem::path& path) {
  const std::size_t n = model.size();
  if (n == 0 || model.k_distance.size() != n || model.lrd.size() != n ||
      model.neighbors.size() != n) {
    throw InvalidArgumentError("LOF model is incomplete");
  }
  nlohmann::json header;
  header["type"] = "lof";
  header["rows"] = model.points.rows;
  header["cols"] = model.points.cols;
  header["k"] = model.k;
  auto out = open_checkpoint_out(path, header);
  write_exact(out, model.points.data.data(), model.points.data.size() * sizeof(double));
  write_exact(out, model.k_distance.data(), n * sizeof(double));
  write_exact(out, model.lrd.data(), n * sizeof(double));
  std::vector<std::uint64_t> flat;
  flat.reserve(n * model.k);
  for (const auto& nn : model.neighbors) {
    if (nn.size() != model.k) throw InvalidArgumentError("LOF model is incomplete");
    for (std::size_t o : nn) flat.push_back(o);
  }
  write_exact(out, flat.data(), flat.size() * sizeof(std::uint64_t));
  out.flush();
  if (!out) throw IoError("failed writing detector checkpoint to " + path.string());
}

LofModel load_lof(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open detector checkpoint " + path.string());
  const nlohmann::json header = open_checkpoint_in(in, path, "lof");
  LofModel model;
  model.points.rows = header.at("rows").get<std::size_t>();
  model.points.cols = header.at("cols").get<std::size_t>();
  model.k = header.at("k").get<std::size_t>();
  const std::size_t n = model.points.rows;
  if (n == 0 || model.points.cols == 0 || model.k < 1 || model.k >= n) {
    throw FormatError("LOF checkpoint header is inconsistent");
  }
  read_doubles(in, model.points.data, n * model.points.cols, "points");
  read_doubles(in, model.k_distance, n, "k-distances");
  read_doubles(in, model.lrd, n, "reachability densities");
  std::vector<std::uint64_t> flat(n * model.k);
  read_exact(in, flat.data(), flat.size() * sizeof(std::uint64_t), "neighbors");
  model.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    model.neighbors[i].assign(flat.begin() + static_cast<std::ptrdiff_t>(i * model.k),
                              flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * model.k));
    for (std::size_t o : model.neighbors[i]) {
      if (o >= n) throw FormatError("LOF checkpoint neighbor index out of range");
    }
  }
  for (double v : model.points.data) {
    if (!std::isfinite(v)) throw FormatError("LOF points contain non-finite values");
  }
  for (double v : model.k_distance) {
    if (!std::isfinite(v) || v < 0.0) throw FormatError("LOF k-distances are invalid");
  }
  for (double v : model.lrd) {
    if (std::isnan(v) || v <= 0.0) throw FormatError("LOF densities are invalid");
  }
  return model;
}

void save_iforest(const IsoForest& model, const std::filesystem::path& path) {
  if (model.trees.empty() || model.psi < 2 || model.dims == 0) {
    throw InvalidArgumentError("isolation forest model is incomplete");
  }
  nlohmann::json header;
  header["type"] = "iforest";
  header["psi"] = model.psi;
  header["seed"] = model.seed;
  header["dims"] = model.dims;
  nlohmann::json sizes = nlohmann::json::array();
  for (const IsoTree& t : model.trees) sizes.push_back(t.nodes.size());
  header["tree_nodes"] = std::move(sizes);
  auto out = open_checkpoint_out(path, header);
  for (const IsoTree& tree : model.trees) {
    for (const IsoNode& nd : tree.nodes) {
      write_exact(out, &nd.attr, sizeof(nd.attr));
      write_exact(out, &nd.left, sizeof(nd.left));
      write_exact(out, &nd.right, sizeof(nd.right));
      write_exact(out, &nd.size, sizeof(nd.size));
      write_exact(out, &nd.split, sizeof(nd.split));
    }
  }
  out.flush();
  if (!out) throw IoError("failed writing detector checkpoint to " + path.string());
}

IsoForest load_iforest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open detector checkpoint " + path.string());
  const nlohmann::json header = open_checkpoint_in(in, path, "iforest");
  IsoForest model;
  model.psi = header.at("psi").get<std::size_t>();
  model.seed = header.at("seed").get<std::uint64_t>();
  model.dims = header.at("dims").get<std::size_t>();
  const auto sizes = header.at("tree_nodes").get<std::vector<std::size_t>>();
  if (model.psi < 2 || model.dims == 0 || sizes.empty()) {
    throw FormatError("isolation forest checkpoint header is inconsistent");
  }
  for (std::size_t count : sizes) {
    if (count == 0) throw FormatError("isolation forest checkpoint has an empty tree");
    IsoTree tree;
    tree.nodes.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      IsoNode& nd = tree.nodes[i];
      read_exact(in, &nd.attr, sizeof(nd.attr), "node attr");
      read_exact(in, &nd.left, sizeof(nd.left), "node left");
      read_exact(in, &nd.right, sizeof(nd.right), "node right");
      read_exact(in, &nd.size, sizeof(nd.size), "node size");
      read_exact(in, &nd.split, sizeof(nd.split), "node split");
      if (nd.attr >= 0) {
        const bool children_ok =
            nd.left > static_cast<std::int32_t>(i) &&
            nd.right > static_cast<std::int32_t>(i) &&
            nd.left < static_cast<std::int32_t>(count) &&
            nd.right < static_cast<std::int32_t>(count) &&
            nd.attr < static_cast<std::int32_t>(model.dims) && std::isfinite(nd.split);
        if (!children_ok) throw FormatError("isolation forest checkpoint node is invalid");
      }
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace avtpids
