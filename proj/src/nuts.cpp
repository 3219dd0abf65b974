#include "crimebsf/nuts.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crimebsf/errors.hpp"

namespace crimebsf {

void WelfordVariance::restart(Eigen::Index dim) {
    n_ = 0;
    mean_ = Eigen::VectorXd::Zero(dim);
    m2_ = Eigen::VectorXd::Zero(dim);
}

void WelfordVariance::add(const Eigen::VectorXd& x) {
    ++n_;
    const Eigen::VectorXd delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta.cwiseProduct(x - mean_);
}

Eigen::VectorXd WelfordVariance::sample_variance() const {
    if (n_ > 1) return m2_ / static_cast<double>(n_ - 1);
    return Eigen::VectorXd::Zero(mean_.size());
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
    if (a == -kInf) return b;
    if (b == -kInf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

struct State {
    Eigen::VectorXd q, p, g;
    double logp = 0.0;
};

class Sampler {
public:
    Sampler(const LogDensityFn& f, const NutsConfig& cfg, std::mt19937_64& rng, Eigen::Index dim)
        : f_(f), cfg_(cfg), rng_(rng), inv_metric_(Eigen::VectorXd::Ones(dim)) {}

    void evaluate(State& z) {
        z.logp = f_(z.q, &z.g);
        ++grad_evals_;
        if (!std::isfinite(z.logp) || !z.g.allFinite()) z.logp = -kInf;
    }

    double hamiltonian(const State& z) const {
        if (z.logp == -kInf) return kInf;
        return -z.logp + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    }

    void sample_momentum(State& z) {
        z.p.resize(z.q.size());
        for (Eigen::Index i = 0; i < z.q.size(); ++i) z.p(i) = normal_(rng_) / std::sqrt(inv_metric_(i));
    }

    void leapfrog(State& z, double eps) {
        z.p += 0.5 * eps * z.g;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        evaluate(z);
        if (z.logp == -kInf) return;
        z.p += 0.5 * eps * z.g;
    }

    Eigen::VectorXd p_sharp(const State& z) const { return inv_metric_.cwiseProduct(z.p); }

    static bool criterion(const Eigen::VectorXd& ps_minus, const Eigen::VectorXd& ps_plus, const Eigen::VectorXd& rho) {
        return ps_plus.dot(rho) > 0 && ps_minus.dot(rho) > 0;
    }

    bool build_tree(int depth, State& z, State& z_propose, Eigen::VectorXd& ps_beg, Eigen::VectorXd& ps_end,
                    Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double H0, double sign,
                    int& n_leapfrog, double& log_sum_weight, double& sum_metro_prob) {
        if (depth == 0) {
            leapfrog(z, sign * eps_);
            ++n_leapfrog;
            double h = hamiltonian(z);
            if (std::isnan(h)) h = kInf;
            if (h - H0 > cfg_.max_delta_h) divergent_ = true;
            log_sum_weight = log_sum_exp(log_sum_weight, H0 - h);
            sum_metro_prob += H0 - h > 0 ? 1.0 : std::exp(H0 - h);
            z_propose = z;
            ps_beg = p_sharp(z);
            ps_end = ps_beg;
            rho += z.p;
            p_beg = z.p;
            p_end = p_beg;
            return !divergent_;
        }
        const Eigen::Index n = z.q.size();
        Eigen::VectorXd rho_left = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd ps_init_end(n), p_init_end(n);
        double lsw_left = -kInf;
        if (!build_tree(depth - 1, z, z_propose, ps_beg, ps_init_end, rho_left, p_beg, p_init_end, H0, sign,
                        n_leapfrog, lsw_left, sum_metro_prob))
            return false;

        State z_propose_final = z;
        Eigen::VectorXd rho_right = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd ps_final_beg(n), p_final_beg(n);
        double lsw_right = -kInf;
        if (!build_tree(depth - 1, z, z_propose_final, ps_final_beg, ps_end, rho_right, p_final_beg, p_end, H0, sign,
                        n_leapfrog, lsw_right, sum_metro_prob))
            return false;

        const double lsw_subtree = log_sum_exp(lsw_left, lsw_right);
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
        if (lsw_right > lsw_subtree) {
            z_propose = z_propose_final;
        } else if (uniform_(rng_) < std::exp(lsw_right - lsw_subtree)) {
            z_propose = z_propose_final;
        }

        const Eigen::VectorXd rho_subtree = rho_left + rho_right;
        rho += rho_subtree;
        bool persist = criterion(ps_beg, ps_end, rho_subtree);
        persist = persist && criterion(ps_beg, ps_final_beg, rho_left + p_final_beg);
        persist = persist && criterion(ps_init_end, ps_end, rho_right + p_init_end);
        return persist;
    }

    // One NUTS transition from z (position, logp, gradient); returns accept statistic.
    double transition(State& z, int& depth_out) {
        sample_momentum(z);
        divergent_ = false;
        const Eigen::Index n = z.q.size();
        State z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
        Eigen::VectorXd ps_fwd_bck = p_sharp(z), ps_fwd_fwd = ps_fwd_bck, ps_bck_fwd = ps_fwd_bck,
                        ps_bck_bck = ps_fwd_bck;
        Eigen::VectorXd p_fwd_bck = z.p, p_fwd_fwd = z.p, p_bck_fwd = z.p, p_bck_bck = z.p;
        Eigen::VectorXd rho = z.p;
        double log_sum_weight = 0.0;
        const double H0 = hamiltonian(z);
        int n_leapfrog = 0;
        double sum_metro_prob = 0.0;
        int depth = 0;
        while (depth < cfg_.max_depth) {
            Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n), rho_bck = Eigen::VectorXd::Zero(n);
            bool valid = false;
            double lsw_subtree = -kInf;
            if (uniform_(rng_) > 0.5) {
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                ps_bck_fwd = ps_fwd_bck;
                valid = build_tree(depth, z_fwd, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, H0,
                                   1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
            } else {
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                ps_fwd_bck = ps_bck_fwd;
                valid = build_tree(depth, z_bck, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, H0,
                                   -1.0, n_leapfrog, lsw_subtree, sum_metro_prob);
            }
            if (!valid) break;
            ++depth;
            if (lsw_subtree > log_sum_weight) {
                z_sample = z_propose;
            } else if (uniform_(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
            rho = rho_bck + rho_fwd;
            bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
            persist = persist && criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck);
            persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd);
            if (!persist) break;
        }
        depth_out = depth;
        z = z_sample;
        return n_leapfrog > 0 ? sum_metro_prob / n_leapfrog : 0.0;
    }

    void init_stepsize(const State& z0) {
        State z = z0;
        sample_momentum(z);
        double H0 = hamiltonian(z);
        leapfrog(z, eps_);
        double h = hamiltonian(z);
        if (std::isnan(h)) h = kInf;
        double delta_h = H0 - h;
        const int direction = delta_h > std::log(0.8) ? 1 : -1;
        for (int it = 0; it < 100; ++it) {
            z = z0;
            sample_momentum(z);
            H0 = hamiltonian(z);
            leapfrog(z, eps_);
            h = hamiltonian(z);
            if (std::isnan(h)) h = kInf;
            delta_h = H0 - h;
            if (direction == 1 && !(delta_h > std::log(0.8))) break;
            if (direction == -1 && !(delta_h < std::log(0.8))) break;
            eps_ = direction == 1 ? 2.0 * eps_ : 0.5 * eps_;
            if (eps_ > 1e7) throw ComputeError("step size search diverged; posterior may be improper");
            if (eps_ == 0.0) throw ComputeError("step size search collapsed to zero; no acceptable step found");
        }
    }

    void restart_dual_averaging() {
        mu_ = std::log(10.0 * eps_);
        counter_ = 0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
    }

    void learn_stepsize(double accept) {
        ++counter_;
        accept = std::min(1.0, accept);
        const double c = static_cast<double>(counter_);
        const double eta = 1.0 / (c + cfg_.t0);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (cfg_.target_accept - accept);
        const double x = mu_ - s_bar_ * std::sqrt(c) / cfg_.gamma;
        const double x_eta = std::pow(c, -cfg_.kappa);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        eps_ = std::exp(x);
    }

    void finish_stepsize() { eps_ = std::exp(x_bar_); }

    const LogDensityFn& f_;
    const NutsConfig& cfg_;
    std::mt19937_64& rng_;
    Eigen::VectorXd inv_metric_;
    double eps_ = 1.0;
    bool divergent_ = false;
    std::int64_t grad_evals_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
    long counter_ = 0;
};

// Window schedule for the diagonal metric.
class WindowSchedule {
public:
    WindowSchedule(int warmup, int init_buffer, int term_buffer, int base_window) : warmup_(warmup) {
        if (warmup < 20) {
            active_ = false;
            return;
        }
        if (init_buffer + base_window + term_buffer > warmup) {
            init_buffer = static_cast<int>(0.15 * warmup);
            term_buffer = static_cast<int>(0.1 * warmup);
            base_window = warmup - (init_buffer + term_buffer);
        }
        init_ = init_buffer;
        term_ = term_buffer;
        window_size_ = base_window;
        next_window_ = init_ + window_size_ - 1;
    }

    [[nodiscard]] bool active() const { return active_; }
    [[nodiscard]] bool in_window() const {
        return counter_ >= init_ && counter_ < warmup_ - term_ && counter_ != warmup_;
    }
    [[nodiscard]] bool end_of_window() const { return counter_ == next_window_ && counter_ != warmup_; }

    void compute_next_window() {
        if (next_window_ == warmup_ - term_ - 1) return;
        window_size_ *= 2;
        next_window_ = counter_ + window_size_;
        if (next_window_ != warmup_ - term_ - 1) {
            const int boundary = next_window_ + 2 * window_size_;
            if (boundary >= warmup_ - term_) next_window_ = warmup_ - term_ - 1;
        }
    }

    void advance() { ++counter_; }

private:
    int warmup_;
    bool active_ = true;
    int init_ = 0, term_ = 0, window_size_ = 0, next_window_ = 0, counter_ = 0;
};

}  // namespace

NutsChain run_nuts(const LogDensityFn& logp, const Eigen::VectorXd& init, const NutsConfig& cfg,
                   std::mt19937_64& rng) {
    if (cfg.warmup < 0 || cfg.iterations <= 0) throw InputError("warmup must be >= 0 and iterations > 0");
    const Eigen::Index dim = init.size();
    Sampler s(logp, cfg, rng, dim);
    State z;
    z.q = init;
    s.evaluate(z);
    if (z.logp == -kInf) throw ComputeError("log density is not finite at the initial point");

    s.init_stepsize(z);
    s.restart_dual_averaging();
    WindowSchedule schedule(cfg.warmup, cfg.init_buffer, cfg.term_buffer, cfg.base_window);
    WelfordVariance est(dim);

    NutsChain out;
    int depth = 0;
    for (int it = 0; it < cfg.warmup; ++it) {
        const double accept = s.transition(z, depth);
        if (s.divergent_) ++out.warmup_divergences;
        s.learn_stepsize(accept);
        if (!schedule.active()) continue;
        if (schedule.in_window()) est.add(z.q);
        if (schedule.end_of_window()) {
            schedule.compute_next_window();
            const double n = static_cast<double>(est.count());
            Eigen::VectorXd var = est.sample_variance();
            s.inv_metric_ = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
            est.restart(dim);
            schedule.advance();
            s.init_stepsize(z);
            s.restart_dual_averaging();
        } else {
            schedule.advance();
        }
    }
    if (cfg.warmup > 0) s.finish_stepsize();

    out.draws.resize(cfg.iterations, dim);
    out.divergent.assign(static_cast<std::size_t>(cfg.iterations), 0);
    out.tree_depth.assign(static_cast<std::size_t>(cfg.iterations), 0);
    double accept_sum = 0.0;
    for (int it = 0; it < cfg.iterations; ++it) {
        accept_sum += s.transition(z, depth);
        out.draws.row(it) = z.q.transpose();
        out.divergent[static_cast<std::size_t>(it)] = s.divergent_ ? 1 : 0;
        out.tree_depth[static_cast<std::size_t>(it)] = depth;
        if (s.divergent_) ++out.divergences;
        if (depth >= cfg.max_depth) ++out.max_depth_hits;
    }
    out.mean_accept = accept_sum / cfg.iterations;
    out.step_size = s.eps_;
    out.inv_metric = s.inv_metric_;
    out.gradient_evals = s.grad_evals_;
    return out;
}

}  // namespace crimebsf
