#include "sslab/particle_sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <shared_mutex>

#include "sslab/errors.hpp"

namespace sslab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kChunk = 4096;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool same_time(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

// Coefficients (ascending in x) of d^k/dx^k exp(-x^2 / (2 sigma^2)) divided by
// the exponential: (-1/sigma)^k He_k(x / sigma).
std::vector<double> hermite_derivative_poly(int k, double sigma) {
  std::vector<double> prev{1.0}, cur;
  if (k == 0) return {};
  cur = {0.0, 1.0};
  for (int n = 1; n < k; ++n) {
    std::vector<double> next(static_cast<std::size_t>(n) + 2, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] += cur[i];
    for (std::size_t i = 0; i < prev.size(); ++i) next[i] -= n * prev[i];
    prev = std::move(cur);
    cur = std::move(next);
  }
  const double sign = k % 2 ? -1.0 : 1.0;
  for (std::size_t m = 0; m < cur.size(); ++m) cur[m] *= sign * std::pow(sigma, -static_cast<double>(k) - static_cast<double>(m));
  return cur;
}

// Draws increments with reusable distribution state.
class IncrementSampler {
 public:
  explicit IncrementSampler(const StableParams& params) : params_(params) {}

  void draw(double dt, Rng& rng, double* out) {
    double scale;
    if (params_.is_gaussian()) {
      scale = std::sqrt(2.0 * dt);
    } else {
      scale = std::sqrt(2.0 * sample_positive_stable(params_.alpha, dt, rng));
    }
    for (int j = 0; j < params_.dim; ++j) out[j] = scale * normal_(rng);
  }

 private:
  StableParams params_;
  std::normal_distribution<double> normal_;
};

struct ProbePlan {
  enum class Mode { poly_gauss, constant, table1d, table_nd, function, characteristic };
  Mode mode = Mode::function;
  simd::PolyGaussian gauss;
  double constant = 0.0;
  std::shared_ptr<const KernelTable> table;
  std::optional<TestFunction> fn;
  std::vector<double> theta;
  std::optional<double> at_time;
  std::size_t column = 0;
};

class Evaluator {
 public:
  Evaluator(const StableParams& params, const std::vector<Probe>& probes) : dim_(params.dim) {
    std::size_t column = 0;
    for (const auto& probe : probes) {
      ProbePlan plan;
      plan.at_time = probe.at_time;
      plan.column = column;
      column += probe.width();
      std::visit([&](const auto& what) { prepare(plan, params, what); }, probe.what);
      plans_.push_back(std::move(plan));
    }
    columns_ = column;
  }

  std::size_t columns() const { return columns_; }

  bool active(std::size_t i, double t) const { return !plans_[i].at_time || same_time(*plans_[i].at_time, t); }
  bool any_active(double t) const {
    for (std::size_t i = 0; i < plans_.size(); ++i)
      if (active(i, t)) return true;
    return false;
  }

  // Raw sums (unit mass) of active probes at time t.
  void accumulate(const simd::PointsView& pts, double t, std::vector<double>& sums, std::uint64_t& outside) const {
    const auto& k = simd::active_kernels();
    double x[3];
    for (std::size_t i = 0; i < plans_.size(); ++i) {
      if (!active(i, t)) continue;
      const ProbePlan& p = plans_[i];
      double& acc = sums[p.column];
      switch (p.mode) {
        case ProbePlan::Mode::poly_gauss:
          acc += k.poly_gauss_sum(pts, p.gauss);
          break;
        case ProbePlan::Mode::constant:
          acc += p.constant * static_cast<double>(pts.count);
          break;
        case ProbePlan::Mode::table1d: {
          const simd::Table1D table{p.table->values().data(), p.table->points_per_axis(), p.table->origin(),
                                    p.table->spacing()};
          std::size_t missed = 0;
          acc += k.table_sum_1d(pts.axes[0], pts.count, table, &missed);
          outside += missed;
          break;
        }
        case ProbePlan::Mode::table_nd:
          for (std::size_t n = 0; n < pts.count; ++n) {
            for (int j = 0; j < dim_; ++j) x[j] = pts.axes[static_cast<std::size_t>(j)][n];
            bool inside = true;
            acc += (*p.table)(std::span<const double>(x, static_cast<std::size_t>(dim_)), &inside);
            if (!inside) ++outside;
          }
          break;
        case ProbePlan::Mode::function:
          for (std::size_t n = 0; n < pts.count; ++n) {
            for (int j = 0; j < dim_; ++j) x[j] = pts.axes[static_cast<std::size_t>(j)][n];
            bool inside = true;
            const double v = (*p.fn)(std::span<const double>(x, static_cast<std::size_t>(dim_)), &inside);
            if (!inside) ++outside;
            if (std::isfinite(v)) acc += v;
          }
          break;
        case ProbePlan::Mode::characteristic: {
          double re = 0.0, im = 0.0;
          for (std::size_t n = 0; n < pts.count; ++n) {
            double phase = 0.0;
            for (int j = 0; j < dim_; ++j) phase += p.theta[static_cast<std::size_t>(j)] * pts.axes[static_cast<std::size_t>(j)][n];
            re += std::cos(phase);
            im += std::sin(phase);
          }
          acc += re;
          sums[p.column + 1] += im;
          break;
        }
      }
    }
  }

 private:
  void prepare(ProbePlan& plan, const StableParams& params, const TestFunction& f) {
    if (f.dim() != params.dim) throw ConfigError("probe dimension does not match params.dim");
    if (const auto* g = std::get_if<GaussianBump>(&f.kind()); g && params.dim <= 3) {
      plan.mode = ProbePlan::Mode::poly_gauss;
      plan.gauss.dim = params.dim;
      for (int j = 0; j < params.dim; ++j) plan.gauss.center[static_cast<std::size_t>(j)] = g->center[static_cast<std::size_t>(j)];
      plan.gauss.inverse_width = g->inverse_width;
      plan.gauss.amplitude = g->amplitude;
    } else if (const auto* c = std::get_if<Constant>(&f.kind())) {
      plan.mode = ProbePlan::Mode::constant;
      plan.constant = c->value;
    } else {
      plan.mode = ProbePlan::Mode::function;
      plan.fn = f;
    }
  }

  void prepare(ProbePlan& plan, const StableParams& params, const KernelProbe& probe) {
    if (probe.k.dim() != params.dim) throw ConfigError("kernel probe multi-index has the wrong dimension");
    if (!(probe.s > 0.0)) throw DomainError("kernel probe time must be positive");
    if (params.dim > 3) throw DomainError("kernel probes support d <= 3");
    if (params.is_gaussian()) {
      plan.mode = ProbePlan::Mode::poly_gauss;
      plan.gauss.dim = params.dim;
      plan.gauss.inverse_width = 1.0 / (4.0 * probe.s);
      plan.gauss.amplitude = std::pow(4.0 * kPi * probe.s, -0.5 * params.dim);
      const double sigma = std::sqrt(2.0 * probe.s);
      for (int j = 0; j < params.dim; ++j)
        plan.gauss.poly[static_cast<std::size_t>(j)] = hermite_derivative_poly(probe.k[j], sigma);
      return;
    }
    plan.table = cached_kernel_table(params, probe.k, probe.s);
    plan.mode = params.dim == 1 ? ProbePlan::Mode::table1d : ProbePlan::Mode::table_nd;
  }

  void prepare(ProbePlan& plan, const StableParams& params, const CharacteristicProbe& probe) {
    if (static_cast<int>(probe.theta.size()) != params.dim) throw ConfigError("characteristic probe has the wrong dimension");
    plan.mode = ProbePlan::Mode::characteristic;
    plan.theta = probe.theta;
  }

  int dim_;
  std::size_t columns_ = 0;
  std::vector<ProbePlan> plans_;
};

// Node-depth inversion with the span constants hoisted.
struct DepthSampler {
  double u, r, lambda, c;
  DepthSampler(const FamilyLaw& law, double span)
      : u(span), r(law.growth()), lambda(law.lambda), c(1.0 - 1.0 / law.conditional_mean(span)) {}
  double operator()(Rng& rng) const {
    const double uc = c * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const double excess = uc / (1.0 - uc);
    const double s = r == 0.0 ? excess / lambda : std::log1p(excess * r / lambda) / r;
    return std::clamp(s, 0.0, u);
  }
};

// Scratch space for one family's genealogy.
struct FamilyScratch {
  std::vector<double> depth;
  std::vector<int> left, right, stack;
  std::vector<double> pos;
};

// Grows the family of one ancestor over span u given its tip count, emitting
// tip positions in tip order. Coalescence depths are i.i.d.; the genealogy is
// the Cartesian tree (max at the root) of the depth sequence.
template <class Sink>
void grow_family(const double* ancestor, double u, std::uint64_t tips, const DepthSampler& depth, int dim,
                 IncrementSampler& inc, Rng& rng, FamilyScratch& s, Sink&& sink) {
  double tip[3], step[3];
  if (tips == 1) {
    inc.draw(u, rng, step);
    for (int j = 0; j < dim; ++j) tip[j] = ancestor[j] + step[j];
    sink(tip);
    return;
  }
  const std::size_t m = static_cast<std::size_t>(tips - 1);
  s.depth.resize(m);
  s.left.assign(m, -1);
  s.right.assign(m, -1);
  s.stack.clear();
  s.pos.resize(m * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < m; ++i) s.depth[i] = depth(rng);

  for (std::size_t i = 0; i < m; ++i) {
    int last = -1;
    while (!s.stack.empty() && s.depth[static_cast<std::size_t>(s.stack.back())] < s.depth[i]) {
      last = s.stack.back();
      s.stack.pop_back();
    }
    s.left[i] = last;
    if (!s.stack.empty()) s.right[static_cast<std::size_t>(s.stack.back())] = static_cast<int>(i);
    s.stack.push_back(static_cast<int>(i));
  }
  const int root = s.stack.front();

  auto at = [&](int node) { return s.pos.data() + static_cast<std::size_t>(node) * static_cast<std::size_t>(dim); };
  inc.draw(u - s.depth[static_cast<std::size_t>(root)], rng, step);
  for (int j = 0; j < dim; ++j) at(root)[j] = ancestor[j] + step[j];
  s.stack.assign(1, root);
  while (!s.stack.empty()) {
    const int v = s.stack.back();
    s.stack.pop_back();
    for (int c : {s.left[static_cast<std::size_t>(v)], s.right[static_cast<std::size_t>(v)]}) {
      if (c < 0) continue;
      inc.draw(s.depth[static_cast<std::size_t>(v)] - s.depth[static_cast<std::size_t>(c)], rng, step);
      for (int j = 0; j < dim; ++j) at(c)[j] = at(v)[j] + step[j];
      s.stack.push_back(c);
    }
  }

  for (std::size_t t = 0; t <= m; ++t) {
    int parent;
    if (t == 0) {
      parent = 0;
    } else if (t == m) {
      parent = static_cast<int>(m - 1);
    } else {
      parent = s.depth[t - 1] < s.depth[t] ? static_cast<int>(t - 1) : static_cast<int>(t);
    }
    inc.draw(s.depth[static_cast<std::size_t>(parent)], rng, step);
    for (int j = 0; j < dim; ++j) tip[j] = at(parent)[j] + step[j];
    sink(tip);
  }
}

RecordRow make_row(double t, std::uint64_t population, const SimulationConfig& config, std::size_t columns) {
  RecordRow row;
  row.t = t;
  row.population = population;
  row.w1 = static_cast<double>(population) * config.particle_mass();
  row.wtilde1 = std::exp(-config.beta * t) * row.w1;
  row.values.assign(columns, kNaN);
  return row;
}

void fill_values(RecordRow& row, const Evaluator& ev, const std::vector<Probe>& probes, const std::vector<double>& sums,
                 double mass) {
  std::size_t column = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    for (std::size_t w = 0; w < probes[i].width(); ++w, ++column)
      if (ev.active(i, row.t)) row.values[column] = mass * sums[column];
  }
}

// Count-only stretch after the last positional record.
void extend_counts(const SimulationConfig& config, const FamilyLaw& law, double time, std::uint64_t population,
                   Rng& rng, std::size_t columns, TrajectoryRecord& rec) {
  std::vector<double> stops;
  if (config.horizon > time && !same_time(config.horizon, time)) stops.push_back(config.horizon);
  for (double c : config.count_times) stops.push_back(c);
  for (double stop : stops) {
    if (population > 0) {
      double offset = 0.0;
      population = evolve_count(law, population, stop - time, rng, &offset);
      if (population == 0) {
        rec.extinct = true;
        rec.extinction_time = time + offset;
      }
      if (population > (std::uint64_t{1} << 62)) {
        rec.aborted = true;
        rec.abort_reason = "population count overflow in count-only extension";
        return;
      }
    }
    time = stop;
    if (std::find(config.count_times.begin(), config.count_times.end(), stop) != config.count_times.end()) {
      RecordRow row = make_row(stop, population, config, columns);
      row.count_only = true;
      rec.rows.push_back(std::move(row));
    }
  }
}

TrajectoryRecord simulate_genealogical(const SimulationConfig& config, const std::vector<Probe>& probes,
                                       std::uint64_t replicate) {
  TrajectoryRecord rec;
  rec.replicate = replicate;
  rec.seed = replicate_seed(config.seed, replicate);
  rec.extinction_time = kNaN;
  Rng rng(rec.seed);
  const Evaluator ev(config.params, probes);
  const std::size_t columns = ev.columns();
  const int dim = config.params.dim;
  const FamilyLaw law{config.birth_rate(), config.death_rate()};
  const double mass = config.particle_mass();

  ParticleState cur = initial_state(config, rng);
  IncrementSampler inc(config.params);
  FamilyScratch scratch;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double time = 0.0;
  std::uint64_t population = cur.population();
  if (population == 0) {
    rec.extinct = true;
    rec.extinction_time = 0.0;
  }

  for (std::size_t ri = 0; ri < config.record_times.size(); ++ri) {
    const double r = config.record_times[ri];
    const double u = r - time;
    const bool last = ri + 1 == config.record_times.size();
    const bool probes_now = ev.any_active(r);
    std::vector<double> sums(columns, 0.0);
    std::uint64_t count = 0;

    if (!rec.extinct) {
      ParticleState next;
      next.dim = dim;
      next.time = r;
      next.mass = mass;
      ParticleState chunk = next;
      const double survive = law.survival(u);
      std::geometric_distribution<std::int64_t> extra(std::min(1.0, 1.0 / law.conditional_mean(u)));
      std::uint64_t families = 0;
      const DepthSampler depths(law, u);
      double anc[3];
      auto sink = [&](const double* tip) {
        if (last) {
          if (!probes_now) return;
          chunk.add(std::span<const double>(tip, static_cast<std::size_t>(dim)));
          if (chunk.population() >= kChunk) {
            ev.accumulate(chunk.view(), r, sums, rec.outside_count);
            chunk.clear();
          }
        } else {
          next.add(std::span<const double>(tip, static_cast<std::size_t>(dim)));
        }
      };
      for (std::size_t a = 0; a < cur.population() && !rec.aborted; ++a) {
        if (unif(rng) >= survive) continue;
        ++families;
        const std::uint64_t tips = 1 + static_cast<std::uint64_t>(extra(rng));
        count += tips;
        if (count > config.max_particles) {
          rec.aborted = true;
          rec.abort_reason = fmt::format("population exceeded max_particles={} before t={}", config.max_particles, r);
          break;
        }
        for (int j = 0; j < dim; ++j) anc[j] = cur.coords[static_cast<std::size_t>(j)][a];
        grow_family(anc, u, tips, depths, dim, inc, rng, scratch, sink);
      }
      if (rec.aborted) break;
      if (families == 0) {
        rec.extinct = true;
        rec.extinction_time = time + law.sample_extinction_time(u, cur.population(), rng);
      }
      if (last) {
        if (chunk.population() > 0) ev.accumulate(chunk.view(), r, sums, rec.outside_count);
      } else if (probes_now) {
        for (std::size_t off = 0; off < next.population(); off += kChunk)
          ev.accumulate(next.view(off, kChunk), r, sums, rec.outside_count);
      }
      if (!last) cur = std::move(next);
    }

    RecordRow row = make_row(r, count, config, columns);
    fill_values(row, ev, probes, sums, mass);
    rec.rows.push_back(std::move(row));
    population = count;
    time = r;
  }
  if (!rec.aborted) extend_counts(config, law, time, population, rng, columns, rec);
  return rec;
}

TrajectoryRecord simulate_event_driven(const SimulationConfig& config, const std::vector<Probe>& probes,
                                       std::uint64_t replicate, const EventObserver& observer) {
  TrajectoryRecord rec;
  rec.replicate = replicate;
  rec.seed = replicate_seed(config.seed, replicate);
  rec.extinction_time = kNaN;
  Rng rng(rec.seed);
  const Evaluator ev(config.params, probes);
  const std::size_t columns = ev.columns();
  const int dim = config.params.dim;
  const double mass = config.particle_mass();
  const auto& times = config.record_times;
  const double end = config.horizon;

  ParticleState init = initial_state(config, rng);
  IncrementSampler inc(config.params);
  std::exponential_distribution<double> clock(static_cast<double>(config.scale));
  std::bernoulli_distribution two(config.two_offspring_probability());

  struct Item {
    double birth;
    std::array<double, 3> x;
  };
  std::vector<Item> stack;
  for (std::size_t i = init.population(); i-- > 0;) {
    Item it{0.0, {0, 0, 0}};
    for (int j = 0; j < dim; ++j) it.x[static_cast<std::size_t>(j)] = init.coords[static_cast<std::size_t>(j)][i];
    stack.push_back(it);
  }

  std::vector<std::uint64_t> counts(times.size(), 0);
  std::vector<std::vector<double>> sums(times.size(), std::vector<double>(columns, 0.0));
  std::uint64_t alive_at_end = 0, processed = 0;
  double last_death = 0.0;
  const std::uint64_t budget = config.max_particles * 100;
  double step[3];

  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    if (++processed > budget) {
      rec.aborted = true;
      rec.abort_reason = "event budget exhausted";
      break;
    }
    const double death = it.birth + clock(rng);
    double now = it.birth;
    auto first = std::lower_bound(times.begin(), times.end(), it.birth);
    for (auto ti = first; ti != times.end() && *ti < death; ++ti) {
      inc.draw(*ti - now, rng, step);
      for (int j = 0; j < dim; ++j) it.x[static_cast<std::size_t>(j)] += step[j];
      now = *ti;
      const auto idx = static_cast<std::size_t>(ti - times.begin());
      ++counts[idx];
      if (counts[idx] > config.max_particles) {
        rec.aborted = true;
        rec.abort_reason = fmt::format("population exceeded max_particles={} at t={}", config.max_particles, *ti);
      }
      if (ev.any_active(*ti)) {
        simd::PointsView pv;
        pv.dim = dim;
        pv.count = 1;
        for (int j = 0; j < dim; ++j) pv.axes[static_cast<std::size_t>(j)] = &it.x[static_cast<std::size_t>(j)];
        ev.accumulate(pv, *ti, sums[idx], rec.outside_count);
      }
    }
    if (rec.aborted) break;
    if (death > end) {
      ++alive_at_end;
      continue;
    }
    inc.draw(death - now, rng, step);
    for (int j = 0; j < dim; ++j) it.x[static_cast<std::size_t>(j)] += step[j];
    const bool split = two(rng);
    if (observer) observer(death, split ? +1 : -1);
    if (split) {
      stack.push_back(Item{death, it.x});
      stack.push_back(Item{death, it.x});
    } else {
      last_death = std::max(last_death, death);
    }
  }

  if (!rec.aborted) {
    for (std::size_t i = 0; i < times.size(); ++i) {
      RecordRow row = make_row(times[i], counts[i], config, columns);
      fill_values(row, ev, probes, sums[i], mass);
      rec.rows.push_back(std::move(row));
    }
    if (alive_at_end == 0) {
      rec.extinct = true;
      rec.extinction_time = init.population() == 0 ? 0.0 : last_death;
    }
    const FamilyLaw law{config.birth_rate(), config.death_rate()};
    // Continue with counts beyond the particle horizon.
    SimulationConfig tail = config;
    tail.horizon = end;
    extend_counts(tail, law, end, alive_at_end, rng, columns, rec);
  }
  return rec;
}

struct TableKey {
  double alpha;
  int dim;
  std::vector<int> k;
  double s;
  auto operator<=>(const TableKey&) const = default;
};

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t replicate_seed(std::uint64_t base, std::uint64_t index) { return mix64(mix64(base) ^ mix64(~index)); }

double sample_positive_stable(double alpha, double dt, Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw DomainError("alpha must lie in (0, 2]");
  if (!(dt > 0.0)) throw DomainError("increment span must be positive");
  const double g = 0.5 * alpha;
  if (g == 1.0) return dt;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double v;
  do {
    v = kPi * unif(rng);
  } while (v <= 0.0);
  const double e = expo(rng);
  const double s = std::sin(g * v) / std::pow(std::sin(v), 1.0 / g) *
                   std::pow(std::sin((1.0 - g) * v) / e, (1.0 - g) / g);
  return std::pow(dt, 1.0 / g) * s;
}

void sample_stable_increment(const StableParams& params, double dt, Rng& rng, std::span<double> out) {
  params.validate();
  if (!(dt > 0.0)) throw DomainError("increment span must be positive");
  if (static_cast<int>(out.size()) != params.dim) throw DomainError("output span has the wrong dimension");
  std::normal_distribution<double> normal;
  const double var = params.is_gaussian() ? dt : sample_positive_stable(params.alpha, dt, rng);
  const double scale = std::sqrt(2.0 * var);
  for (double& v : out) v = scale * normal(rng);
}

std::vector<double> sample_stable_increment(const StableParams& params, double dt, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(params.dim));
  sample_stable_increment(params, dt, rng, out);
  return out;
}

const char* engine_name(Engine e) { return e == Engine::event_driven ? "event_driven" : "genealogical"; }

Engine parse_engine(const std::string& name) {
  if (name == "genealogical") return Engine::genealogical;
  if (name == "event_driven") return Engine::event_driven;
  throw ConfigError("unknown engine: " + name + " (expected genealogical or event_driven)");
}

void SimulationConfig::validate() const {
  try {
    params.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
  if (scale < 1) throw ConfigError("scale n must be a positive integer");
  if (beta > static_cast<double>(scale)) throw ConfigError("beta / (2n) must not exceed 1/2");
  if (initial.dim() != params.dim) throw ConfigError("initial measure dimension does not match params.dim");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
  if (record_times.empty()) throw ConfigError("at least one record time is required");
  for (std::size_t i = 0; i < record_times.size(); ++i) {
    if (!(record_times[i] > 0.0) || record_times[i] > horizon * (1.0 + 1e-12))
      throw ConfigError(fmt::format("record time {} outside (0, horizon={}]", record_times[i], horizon));
    if (i > 0 && !(record_times[i] > record_times[i - 1])) throw ConfigError("record times must be strictly increasing");
  }
  for (std::size_t i = 0; i < count_times.size(); ++i) {
    if (!(count_times[i] > horizon)) throw ConfigError("count-only times must lie beyond the horizon");
    if (i > 0 && !(count_times[i] > count_times[i - 1])) throw ConfigError("count-only times must be strictly increasing");
  }
  if (max_particles < 1) throw ConfigError("max_particles must be positive");
  const double expected = static_cast<double>(scale) * initial.total_mass() * std::exp(beta * horizon);
  if (expected > static_cast<double>(max_particles) / 10.0)
    throw CapacityError(fmt::format("expected population n m(1) e^(beta T) = {:.4g} exceeds max_particles/10 = {:.4g}",
                                    expected, static_cast<double>(max_particles) / 10.0));
}

std::vector<std::string> probe_columns(const std::vector<Probe>& probes) {
  std::vector<std::string> cols;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const std::string base = probes[i].name.empty() ? fmt::format("f_{}", i + 1) : probes[i].name;
    if (probes[i].width() == 2) {
      cols.push_back(base + "_re");
      cols.push_back(base + "_im");
    } else {
      cols.push_back(base);
    }
  }
  return cols;
}

const RecordRow* TrajectoryRecord::row_at(double t) const {
  for (const auto& r : rows)
    if (same_time(r.t, t)) return &r;
  return nullptr;
}

void ParticleState::add(std::span<const double> x) {
  for (int j = 0; j < dim; ++j) coords[static_cast<std::size_t>(j)].push_back(x[static_cast<std::size_t>(j)]);
}

void ParticleState::clear() {
  for (auto& c : coords) c.clear();
}

simd::PointsView ParticleState::view(std::size_t offset, std::size_t count) const {
  simd::PointsView v;
  v.dim = dim;
  const std::size_t n = population();
  offset = std::min(offset, n);
  v.count = std::min(count, n - offset);
  for (int j = 0; j < dim; ++j) v.axes[static_cast<std::size_t>(j)] = coords[static_cast<std::size_t>(j)].data() + offset;
  return v;
}

double evaluate_functional(const ParticleState& state, const TestFunction& f, std::uint64_t* outside) {
  const Evaluator ev(StableParams{2.0, state.dim}, {Probe{"f", f, std::nullopt}});
  std::vector<double> sums(1, 0.0);
  std::uint64_t missed = 0;
  for (std::size_t off = 0; off < state.population(); off += kChunk)
    ev.accumulate(state.view(off, kChunk), state.time, sums, missed);
  if (outside) *outside += missed;
  return state.mass * sums[0];
}

double evaluate_kernel_functional(const ParticleState& state, const StableParams& params, const MultiIndex& k, double s,
                                  std::uint64_t* outside) {
  if (params.dim != state.dim) throw DomainError("state dimension does not match params.dim");
  const Evaluator ev(params, {Probe{"kernel", KernelProbe{k, s}, std::nullopt}});
  std::vector<double> sums(1, 0.0);
  std::uint64_t missed = 0;
  for (std::size_t off = 0; off < state.population(); off += kChunk)
    ev.accumulate(state.view(off, kChunk), state.time, sums, missed);
  if (outside) *outside += missed;
  return state.mass * sums[0];
}

std::complex<double> empirical_characteristic(const ParticleState& state, std::span<const double> theta) {
  if (static_cast<int>(theta.size()) != state.dim) throw DomainError("theta dimension does not match the state");
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < state.population(); ++i) {
    double phase = 0.0;
    for (int j = 0; j < state.dim; ++j) phase += theta[static_cast<std::size_t>(j)] * state.coords[static_cast<std::size_t>(j)][i];
    re += std::cos(phase);
    im += std::sin(phase);
  }
  return {state.mass * re, state.mass * im};
}

std::shared_ptr<const KernelTable> cached_kernel_table(const StableParams& params, const MultiIndex& k, double s) {
  static std::shared_mutex mutex;
  static std::map<TableKey, std::shared_ptr<const KernelTable>> cache;
  TableKey key{params.alpha, params.dim, std::vector<int>(k.entries().begin(), k.entries().end()), s};
  {
    std::shared_lock lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  auto table = std::make_shared<const KernelTable>(KernelTable::build_default(params, k, s));
  std::unique_lock lock(mutex);
  return cache.emplace(std::move(key), std::move(table)).first->second;
}

ParticleState initial_state(const SimulationConfig& config, Rng& rng) {
  ParticleState state;
  state.dim = config.params.dim;
  state.mass = config.particle_mass();
  const auto count = static_cast<std::uint64_t>(std::llround(static_cast<double>(config.scale) * config.initial.total_mass()));
  const auto& atoms = config.initial.atoms();
  std::vector<double> weights;
  for (const auto& a : atoms) weights.push_back(a.mass);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t a = atoms.size() == 1 ? 0 : pick(rng);
    state.add(atoms[a].location);
  }
  return state;
}

double FamilyLaw::conditional_mean(double u) const {
  const double r = growth();
  return r == 0.0 ? 1.0 + lambda * u : 1.0 + lambda / r * std::expm1(r * u);
}

double FamilyLaw::survival(double u) const { return std::exp(growth() * u) / conditional_mean(u); }

double FamilyLaw::sample_node_depth(double u, Rng& rng) const { return DepthSampler(*this, u)(rng); }

double FamilyLaw::sample_extinction_time(double u, std::uint64_t families, Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double qu = 1.0 - survival(u);
  const double q = qu * std::pow(unif(rng), 1.0 / static_cast<double>(std::max<std::uint64_t>(families, 1)));
  const double r = growth();
  double s;
  if (r == 0.0) {
    s = q / (lambda * (1.0 - q));
  } else {
    const double y = mu * (1.0 - q) / (mu - q * lambda);
    s = std::log(y) / r;
  }
  return std::clamp(s, 0.0, u);
}

std::uint64_t evolve_count(const FamilyLaw& law, std::uint64_t population, double u, Rng& rng,
                           double* extinction_offset) {
  if (population == 0) return 0;
  std::binomial_distribution<std::int64_t> survivors_dist(static_cast<std::int64_t>(population), law.survival(u));
  const auto survivors = static_cast<std::uint64_t>(survivors_dist(rng));
  if (survivors == 0) {
    if (extinction_offset) *extinction_offset = law.sample_extinction_time(u, population, rng);
    return 0;
  }
  const double p = std::min(1.0, 1.0 / law.conditional_mean(u));
  if (p >= 1.0) return survivors;
  std::negative_binomial_distribution<std::int64_t> extra(static_cast<std::int64_t>(survivors), p);
  return survivors + static_cast<std::uint64_t>(extra(rng));
}

TrajectoryRecord simulate(const SimulationConfig& config, const std::vector<Probe>& probes, std::uint64_t replicate,
                          const EventObserver& observer) {
  config.validate();
  if (config.engine == Engine::event_driven) return simulate_event_driven(config, probes, replicate, observer);
  return simulate_genealogical(config, probes, replicate);
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRecord>& records,
                          const std::vector<Probe>& probes) {
  out << "replicate,t,population,W1,Wtilde1";
  for (const auto& c : probe_columns(probes)) out << ',' << c;
  out << ",extinct_flag\n";
  for (const auto& rec : records) {
    for (const auto& row : rec.rows) {
      out << fmt::format("{},{:.17g},{},{:.17g},{:.17g}", rec.replicate, row.t, row.population, row.w1, row.wtilde1);
      for (double v : row.values) out << ',' << (std::isnan(v) ? std::string("nan") : fmt::format("{:.17g}", v));
      const bool dead = rec.extinct && rec.extinction_time <= row.t;
      out << ',' << (dead ? 1 : 0) << '\n';
    }
  }
}

}  // namespace sslab
