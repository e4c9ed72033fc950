#include "gpmala/benchmark.hpp"

#include "gpmala/error.hpp"

#include <limits>
#include <utility>

namespace gpmala {

// Shortest augmenting path with dual potentials (Jonker-Volgenant style), one row at a time.
std::vector<int> linear_assignment(int n, const std::function<void(int, Vector&)>& row_costs) {
  require(n >= 0, "assignment size must be nonnegative");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, 0.0), shortest(n);
  std::vector<int> path(n, -1), col4row(n, -1), row4col(n, -1), remaining(n);
  std::vector<char> sr(n), sc(n);
  Vector costs(n);

  for (int cur = 0; cur < n; ++cur) {
    double min_val = 0.0;
    int left = n;
    for (int it = 0; it < n; ++it) remaining[it] = n - it - 1;
    std::fill(sr.begin(), sr.end(), 0);
    std::fill(sc.begin(), sc.end(), 0);
    std::fill(shortest.begin(), shortest.end(), inf);
    int sink = -1;
    int i = cur;
    while (sink == -1) {
      int index = -1;
      double lowest = inf;
      sr[i] = 1;
      row_costs(i, costs);
      for (int it = 0; it < left; ++it) {
        const int j = remaining[it];
        const double r = min_val + costs[j] - u[i] - v[j];
        if (r < shortest[j]) {
          path[j] = i;
          shortest[j] = r;
        }
        if (shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == -1)) {
          lowest = shortest[j];
          index = it;
        }
      }
      min_val = lowest;
      if (!(min_val < inf)) throw Error("assignment problem is infeasible");
      const int j = remaining[index];
      if (row4col[j] == -1)
        sink = j;
      else
        i = row4col[j];
      sc[j] = 1;
      remaining[index] = remaining[--left];
    }

    u[cur] += min_val;
    for (int r = 0; r < n; ++r)
      if (sr[r] && r != cur) u[r] += min_val - shortest[col4row[r]];
    for (int c = 0; c < n; ++c)
      if (sc[c]) v[c] -= min_val - shortest[c];

    for (int j = sink;;) {
      const int r = path[j];
      row4col[j] = r;
      std::swap(col4row[r], j);
      if (r == cur) break;
    }
  }
  return col4row;
}

double wasserstein1(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "W1 needs equal sample counts");
  require(a.cols() == b.cols(), "W1 samples must share a dimension");
  require(a.rows() >= 1, "W1 needs nonempty samples");
  require(all_finite(a) && all_finite(b), "W1 samples must be finite");
  const auto n = static_cast<int>(a.rows());
  const auto assignment = linear_assignment(n, [&](int i, Vector& out) {
    out = (b.rowwise() - a.row(i)).rowwise().norm();
  });
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += (a.row(i) - b.row(assignment[static_cast<std::size_t>(i)])).norm();
  return total / n;
}

}  // namespace gpmala
