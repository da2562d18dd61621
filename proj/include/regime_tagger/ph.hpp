#pragma once

// Vietoris-Rips filtrations and persistent homology over GF(2).
//
// Simplices carry the closed-convention filtration value: a simplex is
// present at scale eps iff eps >= max pairwise distance of its vertices.
// Persistence pairs are computed by column reduction of the anti-transposed
// boundary matrix (the coboundary matrix in reverse filtration order) with
// clearing; the resulting pairs are identical to those of the homology
// reduction, and clearing removes every death simplex of degree k from the
// degree k+1 pass.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "regime_tagger/embed.hpp"
#include "regime_tagger/error.hpp"

namespace regime_tagger::ph {

/// Largest supported homology degree. Filtrations then hold simplices up to
/// dimension kMaxHomologyDim + 1, i.e. at most four vertices.
inline constexpr int kMaxHomologyDim = 2;
inline constexpr std::size_t kMaxSimplexVertices = kMaxHomologyDim + 2;

struct Simplex {
  std::array<std::uint32_t, kMaxSimplexVertices> vertex_buffer{};
  int dim = 0;
  double value = 0.0;

  [[nodiscard]] std::span<const std::uint32_t> vertices() const noexcept {
    return {vertex_buffer.data(), static_cast<std::size_t>(dim) + 1};
  }

  /// Filtration order: value, then dimension, then vertices lexicographically.
  friend bool operator<(const Simplex& a, const Simplex& b) noexcept {
    if (a.value != b.value) return a.value < b.value;
    if (a.dim != b.dim) return a.dim < b.dim;
    return std::lexicographical_compare(a.vertices().begin(), a.vertices().end(), b.vertices().begin(),
                                        b.vertices().end());
  }
};

inline Simplex make_simplex(std::initializer_list<std::uint32_t> vertices, double value) {
  if (vertices.size() == 0 || vertices.size() > kMaxSimplexVertices) throw ConfigError("simplex: bad vertex count");
  Simplex s;
  std::copy(vertices.begin(), vertices.end(), s.vertex_buffer.begin());
  s.dim = static_cast<int>(vertices.size()) - 1;
  s.value = value;
  return s;
}

class Filtration {
 public:
  Filtration(std::vector<Simplex> simplices, int max_dim, double max_eps, std::size_t n_points)
      : simplices_(std::move(simplices)), max_dim_(max_dim), max_eps_(max_eps), n_points_(n_points) {}

  [[nodiscard]] const std::vector<Simplex>& simplices() const noexcept { return simplices_; }
  [[nodiscard]] std::size_t size() const noexcept { return simplices_.size(); }
  [[nodiscard]] const Simplex& operator[](std::size_t i) const noexcept { return simplices_[i]; }
  [[nodiscard]] int max_dim() const noexcept { return max_dim_; }
  [[nodiscard]] double max_eps() const noexcept { return max_eps_; }
  [[nodiscard]] std::size_t n_points() const noexcept { return n_points_; }

  [[nodiscard]] std::size_t count(int dim) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(simplices_.begin(), simplices_.end(), [dim](const Simplex& s) { return s.dim == dim; }));
  }

 private:
  std::vector<Simplex> simplices_;
  int max_dim_;
  double max_eps_;
  std::size_t n_points_;
};

/// Pairwise Euclidean distances, row-major n x n.
inline std::vector<double> distance_matrix(const embed::PointCloud& cloud) {
  const std::size_t n = cloud.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = cloud.distance(i, j);
  }
  return d;
}

inline double diameter(const embed::PointCloud& cloud) {
  double best = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (std::size_t j = i + 1; j < cloud.size(); ++j) best = std::max(best, cloud.distance(i, j));
  }
  return best;
}

/// Clique complex of the max_eps-neighbourhood graph, truncated to simplices
/// of dimension <= max_dim + 1 (the extra dimension kills degree-max_dim
/// cycles).
inline Filtration rips_filtration(const embed::PointCloud& cloud, double max_eps, int max_dim) {
  if (cloud.empty()) throw DataError("rips_filtration: empty point cloud");
  if (max_dim < 0 || max_dim > kMaxHomologyDim) {
    throw ConfigError("rips_filtration: max_dim must be in [0, " + std::to_string(kMaxHomologyDim) + "]");
  }
  if (!(max_eps > 0.0)) throw ConfigError("rips_filtration: max_eps must be positive");

  const std::size_t n = cloud.size();
  const auto dist = distance_matrix(cloud);
  auto d = [&](std::size_t i, std::size_t j) { return dist[i * n + j]; };
  const int top = max_dim + 1;

  std::vector<Simplex> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(make_simplex({i}, 0.0));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) {
      const double dij = d(i, j);
      if (dij > max_eps) continue;
      out.push_back(make_simplex({i, j}, dij));
      if (top < 2) continue;
      for (std::uint32_t k = j + 1; k < n; ++k) {
        const double dijk = std::max({dij, d(i, k), d(j, k)});
        if (dijk > max_eps) continue;
        out.push_back(make_simplex({i, j, k}, dijk));
        if (top < 3) continue;
        for (std::uint32_t l = k + 1; l < n; ++l) {
          const double dijkl = std::max({dijk, d(i, l), d(j, l), d(k, l)});
          if (dijkl > max_eps) continue;
          out.push_back(make_simplex({i, j, k, l}, dijkl));
        }
      }
    }
  }
  std::sort(out.begin(), out.end());
  return Filtration(std::move(out), max_dim, max_eps, n);
}

struct Bar {
  int dim = 0;
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();
  bool capped = false;

  [[nodiscard]] double length() const noexcept { return death - birth; }
  [[nodiscard]] bool infinite() const noexcept { return std::isinf(death); }
  [[nodiscard]] bool zero_length() const noexcept { return death == birth; }

  friend bool operator==(const Bar&, const Bar&) = default;
  friend bool operator<(const Bar& a, const Bar& b) noexcept {
    return std::tie(a.dim, a.birth, a.death, a.capped) < std::tie(b.dim, b.birth, b.death, b.capped);
  }
};

struct PersistenceDiagram {
  std::vector<Bar> bars;
  double t_max = 0.0;
  double r = 2.0;
  int max_dim = 1;
  std::size_t n_points = 0;

  [[nodiscard]] std::vector<Bar> bars_of(int dim) const {
    std::vector<Bar> out;
    for (const Bar& b : bars) {
      if (b.dim == dim) out.push_back(b);
    }
    return out;
  }

  friend bool operator==(const PersistenceDiagram&, const PersistenceDiagram&) = default;
};

inline constexpr double kDefaultCapOffset = 2.0;

/// Assigns every unpaired (infinite or previously capped) bar the death
/// t_max + r and marks it capped. Finite bars are untouched.
inline PersistenceDiagram cap_infinite_bars(PersistenceDiagram diagram, double t_max, double r = kDefaultCapOffset) {
  if (!(r > 0.0)) throw ConfigError("cap_infinite_bars: r must be positive");
  for (Bar& b : diagram.bars) {
    if (b.capped || b.infinite()) {
      b.death = t_max + r;
      b.capped = true;
    }
  }
  diagram.t_max = t_max;
  diagram.r = r;
  return diagram;
}

namespace detail {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Maps a sorted vertex tuple to its position in a filtration. Uses the
/// combinatorial number system as a dense key; falls back to a hash map when
/// the dense table would be too large.
class SimplexLookup {
 public:
  SimplexLookup(const Filtration& f, int dim) : n_(f.n_points()) {
    binom_.assign((n_ + 1) * kMaxSimplexVertices, 0);
    for (std::size_t v = 0; v <= n_; ++v) {
      for (std::size_t k = 0; k < kMaxSimplexVertices; ++k) binom_[v * kMaxSimplexVertices + k] = binomial(v, k + 1);
    }
    const std::uint64_t slots = binomial(n_, static_cast<std::uint64_t>(dim) + 1);
    dense_ = slots <= (std::uint64_t{1} << 25);
    if (dense_) table_.assign(slots, kAbsent);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (f[i].dim != dim) continue;
      const auto key = encode(f[i].vertices());
      if (dense_) {
        table_[key] = static_cast<std::uint32_t>(i);
      } else {
        map_.emplace(key, static_cast<std::uint32_t>(i));
      }
    }
  }

  /// Position of the simplex, or kAbsent.
  [[nodiscard]] std::uint32_t find(std::span<const std::uint32_t> vertices) const {
    const auto key = encode(vertices);
    if (dense_) return table_[key];
    auto it = map_.find(key);
    return it == map_.end() ? kAbsent : it->second;
  }

  static constexpr std::uint32_t kAbsent = std::numeric_limits<std::uint32_t>::max();

 private:
  [[nodiscard]] std::uint64_t encode(std::span<const std::uint32_t> vertices) const {
    std::uint64_t key = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i) key += binom_[vertices[i] * kMaxSimplexVertices + i];
    return key;
  }

  std::size_t n_;
  bool dense_ = true;
  std::vector<std::uint64_t> binom_;
  std::vector<std::uint32_t> table_;
  std::unordered_map<std::uint64_t, std::uint32_t> map_;
};

using Column = std::vector<std::uint32_t>;

/// Coboundaries in compressed-row form: cofaces of simplex i are
/// entries[offsets[i] .. offsets[i+1]), ascending by filtration position.
struct Coboundary {
  std::vector<std::uint32_t> offsets;
  std::vector<std::uint32_t> entries;

  [[nodiscard]] std::span<const std::uint32_t> of(std::size_t i) const noexcept {
    return {entries.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

inline Coboundary build_coboundary(const Filtration& f) {
  const std::size_t m = f.size();
  std::vector<SimplexLookup> lookups;
  for (int dim = 0; dim <= f.max_dim(); ++dim) lookups.emplace_back(f, dim);

  // Faces of every simplex of dimension >= 1, via vertex deletion.
  std::vector<std::uint32_t> faces;
  std::vector<std::uint32_t> face_offsets(m + 1, 0);
  std::array<std::uint32_t, kMaxSimplexVertices> buf{};
  for (std::size_t i = 0; i < m; ++i) {
    const Simplex& s = f[i];
    face_offsets[i] = static_cast<std::uint32_t>(faces.size());
    if (s.dim == 0 || s.dim > f.max_dim() + 1) continue;
    const auto verts = s.vertices();
    for (std::size_t drop = 0; drop < verts.size(); ++drop) {
      std::size_t w = 0;
      for (std::size_t v = 0; v < verts.size(); ++v) {
        if (v != drop) buf[w++] = verts[v];
      }
      const auto face = lookups[static_cast<std::size_t>(s.dim - 1)].find({buf.data(), w});
      if (face == SimplexLookup::kAbsent || face >= i) {
        throw ConfigError("filtration: face of simplex " + std::to_string(i) + " missing or out of order");
      }
      faces.push_back(face);
    }
  }
  face_offsets[m] = static_cast<std::uint32_t>(faces.size());

  // Transpose. Iterating cofaces in filtration order keeps each row sorted.
  Coboundary cob;
  cob.offsets.assign(m + 1, 0);
  for (auto face : faces) ++cob.offsets[face + 1];
  for (std::size_t i = 0; i < m; ++i) cob.offsets[i + 1] += cob.offsets[i];
  cob.entries.resize(faces.size());
  std::vector<std::uint32_t> cursor(cob.offsets.begin(), cob.offsets.end() - 1);
  for (std::size_t i = 0; i < m; ++i) {
    for (auto k = face_offsets[i]; k < face_offsets[i + 1]; ++k) cob.entries[cursor[faces[k]]++] = static_cast<std::uint32_t>(i);
  }
  return cob;
}

inline void add_into(Column& target, const Column& source, Column& scratch) {
  scratch.clear();
  std::set_symmetric_difference(target.begin(), target.end(), source.begin(), source.end(),
                                std::back_inserter(scratch));
  target.swap(scratch);
}

}  // namespace detail

/// Persistence pairs of a filtration in degrees 0..max_dim. Bars are sorted
/// by (dim, birth, death); unpaired classes are capped at max_eps + r.
/// Zero-length bars are kept.
inline PersistenceDiagram compute_persistence(const Filtration& f, double r = kDefaultCapOffset) {
  const std::size_t m = f.size();
  const auto cob = detail::build_coboundary(f);

  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> pivot_owner(m, kNone);  // row -> index into reduced
  std::vector<detail::Column> reduced;
  std::vector<bool> cleared(m, false);

  std::vector<std::vector<std::uint32_t>> by_dim(static_cast<std::size_t>(f.max_dim()) + 1);
  for (std::size_t i = 0; i < m; ++i) {
    if (f[i].dim <= f.max_dim()) by_dim[static_cast<std::size_t>(f[i].dim)].push_back(static_cast<std::uint32_t>(i));
  }

  PersistenceDiagram diagram;
  diagram.max_dim = f.max_dim();
  diagram.n_points = f.n_points();
  diagram.t_max = f.max_eps();

  detail::Column column;
  detail::Column scratch;
  for (int dim = 0; dim <= f.max_dim(); ++dim) {
    const auto& simplices = by_dim[static_cast<std::size_t>(dim)];
    for (auto it = simplices.rbegin(); it != simplices.rend(); ++it) {
      const std::uint32_t sigma = *it;
      if (cleared[sigma]) continue;
      const auto cofaces = cob.of(sigma);
      column.assign(cofaces.begin(), cofaces.end());
      while (!column.empty() && pivot_owner[column.front()] != kNone) {
        detail::add_into(column, reduced[pivot_owner[column.front()]], scratch);
      }
      if (column.empty()) {
        diagram.bars.push_back(Bar{dim, f[sigma].value, std::numeric_limits<double>::infinity(), false});
        continue;
      }
      const std::uint32_t tau = column.front();
      pivot_owner[tau] = static_cast<std::uint32_t>(reduced.size());
      cleared[tau] = true;
      diagram.bars.push_back(Bar{dim, f[sigma].value, f[tau].value, false});
      reduced.push_back(column);
    }
  }
  std::sort(diagram.bars.begin(), diagram.bars.end());
  return cap_infinite_bars(std::move(diagram), f.max_eps(), r);
}

/// Betti numbers at scale eps: degree-k bars with birth <= eps < death.
inline std::vector<std::size_t> betti_at(const PersistenceDiagram& diagram, double eps) {
  if (!(eps >= 0.0) || eps > diagram.t_max) {
    throw ConfigError("betti_at: eps must lie in [0, t_max]");
  }
  std::vector<std::size_t> betti(static_cast<std::size_t>(diagram.max_dim) + 1, 0);
  for (const Bar& b : diagram.bars) {
    if (b.dim <= diagram.max_dim && b.birth <= eps && eps < b.death) ++betti[static_cast<std::size_t>(b.dim)];
  }
  return betti;
}

/// How the filtration cutoff is chosen for each window.
struct PersistenceOptions {
  int max_dim = 1;
  /// Fixed cutoff; when unset the cloud diameter is used.
  std::optional<double> t_max;
  double r = kDefaultCapOffset;
};

/// Cutoff used for a cloud under the given options. A diameter of zero
/// (all points coincide) falls back to 1.
inline double resolve_t_max(const embed::PointCloud& cloud, const PersistenceOptions& options) {
  if (options.t_max) return *options.t_max;
  const double diam = diameter(cloud);
  return diam > 0.0 ? diam : 1.0;
}

inline PersistenceDiagram persistence_of(const embed::PointCloud& cloud, const PersistenceOptions& options = {}) {
  return compute_persistence(rips_filtration(cloud, resolve_t_max(cloud, options), options.max_dim), options.r);
}

}  // namespace regime_tagger::ph
