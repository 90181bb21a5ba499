#include "treelab/gw.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace treelab {

namespace {

std::vector<double> parse_number_list(const std::string& body) {
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = std::stod(item, &used);
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size())
      throw std::invalid_argument("offspring spec: bad number '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// n-1 stars and n-1 bars; gaps between bars are the counts.
std::vector<std::uint32_t> uniform_composition(std::size_t n, Rng& rng) {
  const std::size_t slots = 2 * n - 2;
  const std::size_t bars = n - 1;
  std::vector<std::uint32_t> pool(slots);
  std::iota(pool.begin(), pool.end(), 0u);
  for (std::size_t i = 0; i < bars; ++i)
    std::swap(pool[i], pool[i + rng.below(static_cast<std::uint32_t>(slots - i))]);
  pool.resize(bars);
  std::sort(pool.begin(), pool.end());
  std::vector<std::uint32_t> counts(n);
  std::uint32_t prev = 0;
  for (std::size_t i = 0; i < bars; ++i) {
    counts[i] = pool[i] - prev;
    prev = pool[i] + 1;
  }
  counts[n - 1] = static_cast<std::uint32_t>(slots) - prev;
  return counts;
}

std::vector<std::uint32_t> multinomial_counts(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> counts(n, 0);
  for (std::size_t i = 0; i + 1 < n; ++i)
    ++counts[rng.below(static_cast<std::uint32_t>(n))];
  return counts;
}

std::vector<std::uint32_t> rejection_counts(const std::vector<double>& pmf,
                                            std::size_t n, std::size_t max_attempts,
                                            Rng& rng) {
  std::vector<double> cdf(pmf.size());
  std::partial_sum(pmf.begin(), pmf.end(), cdf.begin());
  const std::size_t target = n - 1;
  std::vector<std::uint32_t> counts(n);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    std::size_t sum = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform() * cdf.back();
      const auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
      counts[i] = static_cast<std::uint32_t>(it - cdf.begin());
      sum += counts[i];
      if (sum > target) {
        ok = false;
        break;
      }
    }
    if (ok && sum == target) return counts;
  }
  throw std::runtime_error(
      "offspring rejection sampler gave up after " + std::to_string(max_attempts) +
      " attempts (total progeny " + std::to_string(n) + " may be unreachable)");
}

}  // namespace

OffspringSpec OffspringSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw std::invalid_argument("offspring spec needs the form kind:params, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string body = text.substr(colon + 1);
  OffspringSpec spec;
  if (kind == "geometric") {
    spec.kind = Kind::geometric;
    auto v = parse_number_list(body);
    if (v.size() != 1 || !(v[0] > 0.0 && v[0] < 1.0))
      throw std::invalid_argument("geometric offspring needs one ratio in (0,1)");
    spec.param = v[0];
  } else if (kind == "poisson") {
    spec.kind = Kind::poisson;
    auto v = parse_number_list(body);
    if (v.size() != 1 || !(v[0] > 0.0))
      throw std::invalid_argument("poisson offspring needs one positive mean");
    spec.param = v[0];
  } else if (kind == "table") {
    spec.kind = Kind::table;
    spec.table = parse_number_list(body);
    double sum = 0.0;
    for (double p : spec.table) {
      if (!(p >= 0.0)) throw std::invalid_argument("table offspring entries must be >= 0");
      sum += p;
    }
    if (spec.table.size() < 2 || !(sum > 0.0))
      throw std::invalid_argument("table offspring needs at least two entries with positive mass");
    for (double& p : spec.table) p /= sum;
  } else {
    throw std::invalid_argument("unknown offspring kind '" + kind + "'");
  }
  return spec;
}

std::string OffspringSpec::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::geometric: os << "geometric:" << param; break;
    case Kind::poisson: os << "poisson:" << param; break;
    case Kind::table:
      os << "table:";
      for (std::size_t i = 0; i < table.size(); ++i) os << (i ? "," : "") << table[i];
      break;
  }
  return os.str();
}

std::size_t lukasiewicz_rotation(const std::vector<std::uint32_t>& counts) {
  const std::size_t n = counts.size();
  long long sum = 0;
  long long best = 0;
  std::size_t best_at = 0;  // first prefix attaining the minimum
  for (std::size_t j = 0; j < n; ++j) {
    sum += static_cast<long long>(counts[j]) - 1;
    if (sum < best) {
      best = sum;
      best_at = j + 1;
    }
  }
  if (sum != -1)
    throw std::invalid_argument("offspring counts must sum to size - 1");
  return best_at % n;
}

OrderedTree tree_from_offspring_counts(const std::vector<std::uint32_t>& counts) {
  const std::size_t n = counts.size();
  if (n == 0) throw std::invalid_argument("empty offspring sequence");
  std::vector<int> parent(n);
  parent[0] = -1;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> open;
  open.emplace_back(0, counts[0]);
  for (std::uint32_t v = 1; v < n; ++v) {
    while (!open.empty() && open.back().second == 0) open.pop_back();
    if (open.empty())
      throw std::invalid_argument("offspring sequence closes the tree too early");
    parent[v] = static_cast<int>(open.back().first);
    --open.back().second;
    open.emplace_back(v, counts[v]);
  }
  while (!open.empty() && open.back().second == 0) open.pop_back();
  if (!open.empty())
    throw std::invalid_argument("offspring sequence leaves open slots");
  return OrderedTree::from_parents(parent);
}

OrderedTree sample_gw_conditioned(const OffspringSpec& spec, std::size_t n,
                                  Rng& rng, std::size_t max_attempts) {
  if (n == 0) throw std::invalid_argument("tree size must be positive");
  if (n == 1 && spec.kind != OffspringSpec::Kind::table)
    return OrderedTree::single_vertex();

  std::vector<std::uint32_t> counts;
  switch (spec.kind) {
    case OffspringSpec::Kind::geometric:
      counts = uniform_composition(n, rng);
      break;
    case OffspringSpec::Kind::poisson:
      counts = multinomial_counts(n, rng);
      break;
    case OffspringSpec::Kind::table:
      counts = rejection_counts(spec.table, n, max_attempts, rng);
      break;
  }
  const std::size_t r = lukasiewicz_rotation(counts);
  std::rotate(counts.begin(), counts.begin() + static_cast<std::ptrdiff_t>(r),
              counts.end());
  return tree_from_offspring_counts(counts);
}

OrderedTree quantize_excursion_tree(const Excursion& target, std::size_t n) {
  if (n == 0) throw std::invalid_argument("tree size must be positive");
  if (n == 1) return OrderedTree::single_vertex();
  const std::size_t steps = 2 * (n - 1);
  const double scale = std::sqrt(static_cast<double>(n));
  std::vector<std::uint32_t> depth(2 * n + 1, 0);
  std::uint32_t d = 0;
  for (std::size_t i = 1; i <= steps; ++i) {
    const double ideal =
        scale * target.pl_value(static_cast<double>(i) / static_cast<double>(steps));
    const std::size_t room = steps - i;  // must be able to walk back down
    bool up;
    if (d == 0) {
      up = true;
    } else if (d + 1 > room) {
      up = false;
    } else {
      up = std::abs(ideal - (static_cast<double>(d) + 1.0)) <
           std::abs(ideal - (static_cast<double>(d) - 1.0));
    }
    d = up ? d + 1 : d - 1;
    depth[i] = d;
  }
  return tree_from_depth(depth);
}

}  // namespace treelab
