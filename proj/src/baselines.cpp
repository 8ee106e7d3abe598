#include "sbldoa/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "sbldoa/errors.hpp"
#include "sbldoa/peaks.hpp"

namespace sbldoa {

Method parse_method(std::string_view name) {
  if (name == "cbf") return Method::cbf;
  if (name == "music") return Method::music;
  if (name == "exhaustive") return Method::exhaustive;
  if (name == "sbl") return Method::sbl;
  if (name == "sbl1") return Method::sbl1;
  if (name == "msbl" || name == "m-sbl") return Method::msbl;
  throw DomainError("unknown method '" + std::string(name) + "'");
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::cbf: return "cbf";
    case Method::music: return "music";
    case Method::exhaustive: return "exhaustive";
    case Method::sbl: return "sbl";
    case Method::sbl1: return "sbl1";
    case Method::msbl: return "msbl";
  }
  return "?";
}

namespace {

void require_square(const CMatrix& S_y, const CMatrix& A) {
  if (S_y.rows() != S_y.cols() || S_y.rows() != A.rows())
    throw DomainError("sample covariance must be N x N with N = dictionary rows");
}

// Lexicographic order on (re, im) of each component.
bool lexically_less(const CVector& a, const CVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
    if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
  }
  return false;
}

// A subset is rank deficient when the squared Cholesky pivot of its Gram
// matrix falls below this fraction of the column energy.
constexpr double kRankTol = 1e-9;

struct Candidate {
  double value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> subset;

  bool valid() const { return !subset.empty(); }
};

// True when (value, subset) should replace best: larger value, or equal value
// and lexicographically smaller subset.
bool better(double value, const std::vector<std::size_t>& subset, const Candidate& best) {
  if (!best.valid()) return true;
  if (value > best.value) return true;
  return value == best.value && subset < best.subset;
}

// Scans every subset whose first index is `first`. The last index runs in an
// inner loop that only updates one row of the Cholesky factor of the Gram
// matrix, so each subset costs O(K^2).
class SubsetScan {
 public:
  SubsetScan(const CMatrix& gram, const CMatrix& fit, std::size_t k)
      : gram_(gram), fit_(fit), k_(k), m_(static_cast<std::size_t>(gram.rows())) {}

  Candidate run_first(std::size_t first) const {
    Candidate best;
    if (k_ == 1) {
      consider_single(first, best);
      return best;
    }
    std::vector<std::size_t> prefix(k_ - 1);
    prefix[0] = first;
    for (std::size_t i = 1; i < prefix.size(); ++i) prefix[i] = first + i;
    // the last index needs room after the prefix
    while (prefix.back() + 1 < m_) {
      scan_prefix(prefix, best);
      if (!advance(prefix)) break;
    }
    return best;
  }

  std::size_t n_first() const { return k_ == 1 ? m_ : m_ - k_ + 1; }

 private:
  void consider_single(std::size_t j, Candidate& best) const {
    const auto jj = static_cast<Eigen::Index>(j);
    const double g = gram_(jj, jj).real();
    if (!(g > 0.0)) return;
    const double value = fit_(jj, jj).real() / g;
    std::vector<std::size_t> subset{j};
    if (better(value, subset, best)) best = Candidate{value, std::move(subset)};
  }

  // Next lexicographic prefix with prefix[0] fixed; false when exhausted.
  bool advance(std::vector<std::size_t>& prefix) const {
    const std::size_t p = prefix.size();
    // last usable value for slot i keeps room for the trailing index
    for (std::size_t i = p; i-- > 1;) {
      const std::size_t limit = m_ - 1 - (p - i);
      if (prefix[i] < limit) {
        ++prefix[i];
        for (std::size_t t = i + 1; t < p; ++t) prefix[t] = prefix[t - 1] + 1;
        return true;
      }
    }
    return false;
  }

  void scan_prefix(const std::vector<std::size_t>& prefix, Candidate& best) const {
    const auto p = static_cast<Eigen::Index>(prefix.size());
    CMatrix g_pp(p, p), c_pp(p, p);
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) {
        g_pp(a, b) = gram_(static_cast<Eigen::Index>(prefix[a]), static_cast<Eigen::Index>(prefix[b]));
        c_pp(a, b) = fit_(static_cast<Eigen::Index>(prefix[a]), static_cast<Eigen::Index>(prefix[b]));
      }
    const Eigen::LLT<CMatrix> llt(g_pp);
    if (llt.info() != Eigen::Success) return;
    const auto& l = llt.matrixLLT();
    for (Eigen::Index a = 0; a < p; ++a)
      if (std::norm(l(a, a)) <= kRankTol * g_pp(a, a).real()) return;
    const CMatrix g_inv = llt.solve(CMatrix::Identity(p, p));
    const double base = (g_inv * c_pp).trace().real();

    std::vector<std::size_t> subset(prefix);
    subset.push_back(0);
    CVector g(p), c(p), u(p);
    for (std::size_t j = prefix.back() + 1; j < m_; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      // column j of the Hermitian Gram / fit matrices, rows at the prefix
      for (Eigen::Index a = 0; a < p; ++a) {
        const auto pa = static_cast<Eigen::Index>(prefix[a]);
        g(a) = std::conj(gram_(jj, pa));
        c(a) = std::conj(fit_(jj, pa));
      }
      u.noalias() = g_inv * g;
      const double g_jj = gram_(jj, jj).real();
      const double delta2 = g_jj - g.dot(u).real();
      if (!(delta2 > kRankTol * g_jj)) continue;
      const double num = u.dot(c_pp * u).real() - 2.0 * u.dot(c).real() + fit_(jj, jj).real();
      const double value = base + num / delta2;
      subset.back() = j;
      if (better(value, subset, best)) best = Candidate{value, subset};
    }
  }

  const CMatrix& gram_;
  const CMatrix& fit_;
  std::size_t k_;
  std::size_t m_;
};

}  // namespace

AngularSpectrum cbf_spectrum(const CMatrix& S_y, const CMatrix& A) {
  require_square(S_y, A);
  const double n2 = static_cast<double>(A.rows()) * static_cast<double>(A.rows());
  const CMatrix sa = S_y * A;
  AngularSpectrum out;
  out.values.resize(static_cast<std::size_t>(A.cols()));
  for (Eigen::Index m = 0; m < A.cols(); ++m)
    out.values[static_cast<std::size_t>(m)] =
        std::max(A.col(m).dot(sa.col(m)).real() / n2, 0.0);
  return out;
}

MusicSpectrum music_spectrum(const CMatrix& S_y, const CMatrix& A, int k) {
  require_square(S_y, A);
  const Eigen::Index n = A.rows();
  if (k < 1 || k >= n) throw DomainError("MUSIC needs 1 <= K < N");

  const Eigen::SelfAdjointEigenSolver<CMatrix> eig(S_y);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const RVector& lambda = eig.eigenvalues();
  const double scale = std::max(std::abs(lambda(n - 1)), std::numeric_limits<double>::min());
  constexpr double kTieTol = 1e-12;

  // Descending eigenvalue; (near-)equal eigenvalues form groups ordered by
  // their eigenvectors.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::reverse(order.begin(), order.end());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start + 1;
    while (stop < order.size() &&
           lambda(order[stop - 1]) - lambda(order[stop]) <= kTieTol * scale)
      ++stop;
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(start),
              order.begin() + static_cast<std::ptrdiff_t>(stop), [&](Eigen::Index a, Eigen::Index b) {
                return lexically_less(eig.eigenvectors().col(a), eig.eigenvectors().col(b));
              });
    start = stop;
  }

  MusicSpectrum out;
  const auto ks = static_cast<std::size_t>(k);
  out.subspace_tie = lambda(order[ks - 1]) - lambda(order[ks]) <= kTieTol * scale;

  CMatrix noise(n, n - k);
  double noise_sum = 0.0;
  for (Eigen::Index i = 0; i < n - k; ++i) {
    const Eigen::Index col = order[ks + static_cast<std::size_t>(i)];
    noise.col(i) = eig.eigenvectors().col(col);
    noise_sum += lambda(col);
  }
  out.noise_eigenvalue_mean = noise_sum / static_cast<double>(n - k);

  const CMatrix proj = noise.adjoint() * A;
  out.spectrum.values.resize(static_cast<std::size_t>(A.cols()));
  for (Eigen::Index m = 0; m < A.cols(); ++m) {
    const double num = A.col(m).squaredNorm();
    const double den = std::max(proj.col(m).squaredNorm(), num / kMusicCap);
    out.spectrum.values[static_cast<std::size_t>(m)] = num / den;
  }
  return out;
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(r);
}

double projection_fit(const CMatrix& S_y, const CMatrix& A_active) {
  Eigen::ColPivHouseholderQR<CMatrix> qr(A_active.rows(), A_active.cols());
  qr.setThreshold(std::sqrt(kRankTol));
  qr.compute(A_active);
  if (qr.rank() < A_active.cols()) throw NumericalError("subset is rank deficient");
  const CMatrix q1 = qr.householderQ() * CMatrix::Identity(A_active.rows(), A_active.cols());
  return (q1.adjoint() * S_y * q1).trace().real();
}

DoaEstimate exhaustive_ml(const CMatrix& S_y, const CMatrix& A, const AngularGrid& grid, int k,
                          const ExhaustiveOptions& options) {
  require_square(S_y, A);
  if (static_cast<std::size_t>(A.cols()) != grid.size())
    throw DomainError("grid size does not match dictionary columns");
  if (k < 1 || k >= A.rows()) throw DomainError("exhaustive search needs 1 <= K < N");
  const auto m = static_cast<std::uint64_t>(A.cols());
  const std::uint64_t count = binomial(m, static_cast<std::uint64_t>(k));
  if (count > options.max_subsets)
    throw DomainError("exhaustive search over " + std::to_string(count) +
                      " subsets exceeds the budget of " + std::to_string(options.max_subsets) +
                      "; use a coarser grid");

  const CMatrix gram = A.adjoint() * A;
  const CMatrix fit = A.adjoint() * S_y * A;
  const SubsetScan scan(gram, fit, static_cast<std::size_t>(k));
  const std::size_t n_first = scan.n_first();

  std::vector<Candidate> per_first(n_first);
  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (std::size_t f = 0; f < n_first; ++f) per_first[f] = scan.run_first(f);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t f; (f = next.fetch_add(1)) < n_first;) per_first[f] = scan.run_first(f);
      });
  }

  Candidate best;
  for (const auto& c : per_first)
    if (c.valid() && better(c.value, c.subset, best)) best = c;
  if (!best.valid()) throw DegenerateInputError("no full-rank subset found");

  DoaEstimate est;
  est.method = Method::exhaustive;
  est.indices = best.subset;
  const CMatrix a_m = [&] {
    CMatrix out(A.rows(), k);
    for (int i = 0; i < k; ++i) out.col(i) = A.col(static_cast<Eigen::Index>(best.subset[static_cast<std::size_t>(i)]));
    return out;
  }();
  // least-squares source powers diag(A_M^+ S_y A_M^+H)
  const CMatrix pinv = a_m.completeOrthogonalDecomposition().pseudoInverse();
  const CMatrix powers = pinv * S_y * pinv.adjoint();
  for (int i = 0; i < k; ++i) {
    est.angles_deg.push_back(grid[best.subset[static_cast<std::size_t>(i)]]);
    est.source_powers.push_back(std::max(powers(i, i).real(), 0.0));
  }
  return est;
}

DoaEstimate pick_peaks(const AngularSpectrum& spectrum, const AngularGrid& grid, int k,
                       Method method) {
  if (spectrum.values.size() != grid.size())
    throw DomainError("spectrum length does not match the grid");
  if (k < 1) throw DomainError("number of peaks must be positive");
  DoaEstimate est;
  est.method = method;
  est.indices = find_peaks(spectrum.values, static_cast<std::size_t>(k));
  for (std::size_t idx : est.indices) {
    est.angles_deg.push_back(grid[idx]);
    est.source_powers.push_back(spectrum.values[idx]);
  }
  return est;
}

}  // namespace sbldoa
