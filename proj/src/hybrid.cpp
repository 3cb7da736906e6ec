#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vibrolab/mqc.hpp"

namespace vibro::mqc {

namespace {


struct Engine {
  const LocalElectronic& el;
  const HybridOptions& opts;
  const std::vector<bo::Window>& windows;
  double mass;
  int n;
  HybridResult& res;

  int window_at(double x) const {
    for (std::size_t w = 0; w < windows.size(); ++w)
      if (windows[w].contains(x)) return static_cast<int>(w);
    return -1;
  }

  double energy_of(const BranchRecord& b) const {
    const ElectronicPoint pt = el.at(b.x);
    return b.p * b.p / (2.0 * mass) + pt.energy(b.surface);
  }

  bool outside_domain(double x) const { return x < opts.x_lo || x > opts.x_hi; }

  void park(BranchRecord& b, int w) {
    b.status = BranchStatus::parked;
    b.park_window = w;
    b.park_direction = b.p >= 0.0 ? 1 : -1;
  }

  // Classical flight on the branch surface with the action phase rate p^2/2M - e.
  void advance(BranchRecord& b) {
    if (b.status != BranchStatus::free) return;
    const int w0 = window_at(b.x);
    if (w0 >= 0 && b.window != w0) {
      park(b, w0);
      return;
    }
    const double dt = opts.dt;
    const int s = b.surface;
    ElectronicPoint pt = el.at(b.x);
    double lag = b.p * b.p / (2.0 * mass) - pt.energy(s);
    bool inside_prev = w0 >= 0;
    while (true) {
      if (b.time >= opts.t_max || outside_domain(b.x)) {
        b.status = BranchStatus::finished;
        return;
      }
      const double x_old = b.x, p_old = b.p, lag_old = lag, t_old = b.time;
      const double ph = b.p - 0.5 * dt * pt.gradient(s);
      b.x += dt * ph / mass;
      pt = el.at(b.x);
      b.p = ph - 0.5 * dt * pt.gradient(s);
      b.time += dt;
      lag = b.p * b.p / (2.0 * mass) - pt.energy(s);
      b.phase += 0.5 * dt * (lag_old + lag);
      const int w = window_at(b.x);
      if (w >= 0 && !inside_prev) {
        // back up to the boundary crossed
        const double xb = b.x > x_old ? windows[w].x_lo : windows[w].x_hi;
        const double f = std::clamp((xb - x_old) / (b.x - x_old), 0.0, 1.0);
        b.x = xb;
        b.p = p_old + f * (b.p - p_old);
        b.time = t_old + f * dt;
        const double lag_b = lag_old + f * (lag - lag_old);
        b.phase -= 0.5 * dt * (lag_old + lag);
        b.phase += 0.5 * f * dt * (lag_old + lag_b);
        park(b, w);
        return;
      }
      inside_prev = w >= 0;
    }
  }

  // Mean-field force in the adiabatic basis for normalized amplitudes c.
  static double mean_force(const ElectronicPoint& pt, const SmallCVec& c) {
    const SmallMat g = pt.frame.transpose() * pt.dvdiab * pt.frame;
    double f = 0.0;
    for (Eigen::Index a = 0; a < c.size(); ++a)
      for (Eigen::Index b = 0; b < c.size(); ++b) f -= (std::conj(c(a)) * c(b)).real() * g(a, b);
    return f;
  }

  void log(const std::string& s) { res.log.push_back(s); }

  // Pass a cluster of parked branches through window w.
  void pass(const std::vector<int>& cluster, int w, int direction) {
    ++res.window_passes;
    const bo::Window& win = windows[static_cast<std::size_t>(w)];
    double t_ref = std::numeric_limits<double>::infinity();
    for (int id : cluster) t_ref = std::min(t_ref, res.branches[static_cast<std::size_t>(id)].time);

    SmallCVec c = SmallCVec::Zero(n);
    double total_w = 0.0, e_mean = 0.0, x_entry = 0.0;
    for (int id : cluster) {
      BranchRecord& b = res.branches[static_cast<std::size_t>(id)];
      const double e = energy_of(b);
      const double ph = b.phase - e * (t_ref - b.time);
      c(b.surface) += std::sqrt(b.weight) * std::polar(1.0, ph);
      total_w += b.weight;
      e_mean += b.weight * e;
      x_entry += b.weight * b.x;
      b.status = BranchStatus::consumed;
    }
    if (total_w <= 0.0) return;
    e_mean /= total_w;
    x_entry = std::clamp(x_entry / total_w, win.x_lo, win.x_hi);

    int parent = cluster.front();
    if (cluster.size() > 1) {
      ++res.merges;
      BranchRecord m;
      m.id = static_cast<int>(res.branches.size());
      m.merged_from = cluster;
      m.x = x_entry;
      m.time = t_ref;
      m.weight = total_w;
      m.status = BranchStatus::consumed;
      m.park_window = w;
      m.park_direction = direction;
      m.surface = res.branches[static_cast<std::size_t>(cluster.front())].surface;
      res.branches.push_back(m);
      parent = m.id;
    }
    // coherent sums can change the norm; the pass conserves whatever arrives
    const double wc = c.squaredNorm();
    if (wc <= 1e-300) {
      std::ostringstream os;
      os << "window " << w << ": destructive merge cancelled weight " << total_w;
      log(os.str());
      res.closed_weight += total_w;
      return;
    }
    {
      BranchRecord& pr = res.branches[static_cast<std::size_t>(parent)];
      pr.entry_amplitudes.assign(c.data(), c.data() + c.size());
    }

    // mean-field path through the window
    ElectronicPoint pt = el.at(x_entry);
    SmallCVec u = c / std::sqrt(wc);
    double ev = 0.0;
    for (int k = 0; k < n; ++k) ev += std::norm(u(k)) * pt.energy(k);
    double ke = e_mean - ev;
    if (ke <= 0.0) {
      std::ostringstream os;
      os << "window " << w << ": entry kinetic energy " << ke << " clamped";
      log(os.str());
      ke = 1e-12;
    }
    double x = x_entry;
    double p = direction * std::sqrt(2.0 * mass * ke);
    double t = t_ref;
    double kin_phase = 0.0;
    const double dt = opts.dt;
    while (win.contains(x) && t < opts.t_max) {
      const double va = p / mass;
      const double ka = p * p / (2.0 * mass);
      const double ph = p + 0.5 * dt * mean_force(pt, u);
      const double xn = x + dt * ph / mass;
      ElectronicPoint pn = el.at(xn, &pt);
      const double vb_guess = ph / mass;
      SmallCVec un = u;
      propagate_amplitudes(un, pt, va, pn, vb_guess, dt);
      p = ph + 0.5 * dt * mean_force(pn, un / un.norm());
      // redo with the corrected end velocity
      un = u;
      propagate_amplitudes(un, pt, va, pn, p / mass, dt);
      u = un / un.norm();
      x = xn;
      t += dt;
      kin_phase += 0.5 * dt * (ka + p * p / (2.0 * mass));
      pt = std::move(pn);
    }
    // u carries the electronic evolution; restore the arriving norm and phases
    c = u * std::sqrt(wc);
    // express amplitudes in the gauge of a fresh evaluation at the exit point
    const ElectronicPoint fresh = el.at(x);
    for (int k = 0; k < n; ++k)
      if (fresh.frame.col(k).dot(pt.frame.col(k)) < 0.0) c(k) = -c(k);
    pt = fresh;

    {
      BranchRecord& pr = res.branches[static_cast<std::size_t>(parent)];
      pr.exit_amplitudes.assign(c.data(), c.data() + c.size());
    }
    double e_path = p * p / (2.0 * mass);
    for (int k = 0; k < n; ++k) e_path += std::norm(u(k)) * pt.energy(k);

    std::vector<int> kids;
    double kept = 0.0;
    for (int k = 0; k < n; ++k) {
      const double frac = std::norm(c(k)) / wc;
      if (frac < opts.amplitude_floor) continue;
      const double kek = e_path - pt.energy(k);
      if (kek <= 0.0) {
        std::ostringstream os;
        os << "window " << w << ": closed child on surface " << k << " dropped, weight " << frac * total_w;
        log(os.str());
        res.closed_weight += frac * total_w;
        continue;
      }
      BranchRecord ch;
      ch.id = static_cast<int>(res.branches.size());
      ch.parent = parent;
      ch.x = x;
      ch.p = (p >= 0.0 ? 1.0 : -1.0) * std::sqrt(2.0 * mass * kek);
      ch.time = t;
      ch.surface = k;
      ch.weight = frac;
      ch.phase = std::arg(c(k)) + kin_phase;
      ch.window = w;
      ch.status = BranchStatus::free;
      kept += frac;
      kids.push_back(ch.id);
      res.branches.push_back(ch);
    }
    const double dropped = 1.0 - kept;
    if (kids.empty()) {
      log("window " + std::to_string(w) + ": no open children");
      return;
    }
    // renormalize so children sum to the parent weight
    for (int id : kids) res.branches[static_cast<std::size_t>(id)].weight *= total_w / kept;
    if (dropped > 0.0 && dropped * total_w > 1e-15) {
      std::ostringstream os;
      os << "window " << w << ": deficit " << dropped * total_w << " renormalized onto " << kids.size() << " children";
      log(os.str());
    }
  }

  void prune() {
    std::vector<int> live;
    for (const auto& b : res.branches)
      if (b.status == BranchStatus::free || b.status == BranchStatus::parked) live.push_back(b.id);
    if (live.size() <= opts.branch_cap) return;
    std::sort(live.begin(), live.end(), [&](int a, int b) {
      const double wa = res.branches[static_cast<std::size_t>(a)].weight;
      const double wb = res.branches[static_cast<std::size_t>(b)].weight;
      return wa != wb ? wa < wb : a < b;
    });
    const std::size_t drop = live.size() - opts.branch_cap;
    double lost = 0.0, total = 0.0;
    for (int id : live) total += res.branches[static_cast<std::size_t>(id)].weight;
    for (std::size_t i = 0; i < drop; ++i) {
      BranchRecord& b = res.branches[static_cast<std::size_t>(live[i])];
      lost += b.weight;
      b.status = BranchStatus::pruned;
    }
    const double scale = total / (total - lost);
    for (std::size_t i = drop; i < live.size(); ++i) res.branches[static_cast<std::size_t>(live[i])].weight *= scale;
    res.pruned_weight += lost;
    std::ostringstream os;
    os << "pruned " << drop << " branches, weight " << lost;
    log(os.str());
  }
};

}  // namespace

HybridResult hybrid_run(const BranchInit& init, const DiabaticModel& model, const bo::AdiabaticSurfaces& surfaces,
                        const HybridOptions& opts) {
  if (!(opts.dt > 0.0)) throw std::invalid_argument("hybrid_run: dt must be positive");
  if (init.surface < 0 || init.surface >= model.n_states())
    throw std::invalid_argument("hybrid_run: initial surface out of range");
  if (init.p0 == 0.0) throw std::invalid_argument("hybrid_run: initial momentum must be nonzero");
  if (opts.branch_cap < 1) throw std::invalid_argument("hybrid_run: branch cap must be >= 1");
  const LocalElectronic el(model);
  HybridResult res;
  if (surfaces.has_couplings) {
    const double thr = opts.mask_threshold < 0.0 ? bo::default_mask_threshold(surfaces) : opts.mask_threshold;
    res.windows = bo::windows_from_mask(bo::coupling_free_mask(surfaces, thr), surfaces.grid, opts.window_margin);
  }
  const double mass = model.mass();
  const double merge_dt = opts.merge_dt < 0.0 ? 2.0 * opts.sigma * mass / std::abs(init.p0) : opts.merge_dt;
  const double merge_dx = opts.merge_dx < 0.0 ? 0.5 * opts.sigma : opts.merge_dx;
  Engine eng{el, opts, res.windows, mass, model.n_states(), res};

  BranchRecord root;
  root.id = 0;
  root.x = init.x0;
  root.p = init.p0;
  root.surface = init.surface;
  root.weight = 1.0;
  res.branches.push_back(root);

  std::size_t events = 0;
  while (true) {
    for (std::size_t i = 0; i < res.branches.size(); ++i) eng.advance(res.branches[i]);
    int first = -1;
    for (const auto& b : res.branches)
      if (b.status == BranchStatus::parked &&
          (first < 0 || b.time < res.branches[static_cast<std::size_t>(first)].time))
        first = b.id;
    if (first < 0) break;
    if (++events > opts.max_events) {
      res.low_fidelity = true;
      eng.log("event limit reached");
      break;
    }
    const BranchRecord& lead = res.branches[static_cast<std::size_t>(first)];
    const int w = lead.park_window, dir = lead.park_direction;
    std::vector<int> cluster{first};
    if (opts.coherent) {
      for (const auto& b : res.branches) {
        if (b.id == first || b.status != BranchStatus::parked) continue;
        if (b.park_window != w || b.park_direction != dir) continue;
        if (opts.merge_require_same_surface && b.surface != lead.surface) continue;
        if (b.time - lead.time > merge_dt || std::abs(b.x - lead.x) > merge_dx) continue;
        cluster.push_back(b.id);
      }
    }
    eng.pass(cluster, w, dir);
    eng.prune();
  }
  if (res.pruned_weight > opts.prune_budget) {
    res.low_fidelity = true;
    std::ostringstream os;
    os << "pruned weight " << res.pruned_weight << " exceeds budget " << opts.prune_budget;
    eng.log(os.str());
  }

  std::vector<double> xs;
  std::vector<std::vector<double>> sw;
  for (const auto& b : res.branches) {
    if (b.status != BranchStatus::finished) continue;
    res.leaves.push_back(b.id);
    xs.push_back(b.x);
    std::vector<double> v(static_cast<std::size_t>(model.n_states()), 0.0);
    v[static_cast<std::size_t>(b.surface)] = b.weight;
    sw.push_back(std::move(v));
  }
  res.channels = tally_channels(opts.channels, xs, sw, 0);
  return res;
}

}  // namespace vibro::mqc
