#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "subcontact/dispersal.hpp"
#include "subcontact/errors.hpp"
#include "subcontact/grid.hpp"
#include "subcontact/markspace.hpp"
#include "subcontact/rng.hpp"
#include "subcontact/stats.hpp"

namespace subcontact {

struct Particle {
    std::vector<double> position;
    int mark = 0;
};

// Finite marked particle set on the torus [0, L)^d.
struct Configuration {
    int dim = 1;
    double box_side = 1.0;
    double time = 0.0;
    std::vector<double> coords;  // flat, dim per particle
    std::vector<int> marks;

    std::size_t size() const { return marks.size(); }

    std::span<const double> position(std::size_t i) const {
        return {coords.data() + i * dim, static_cast<std::size_t>(dim)};
    }

    Particle particle(std::size_t i) const {
        return {{coords.begin() + static_cast<long>(i * dim),
                 coords.begin() + static_cast<long>((i + 1) * dim)},
                marks[i]};
    }

    void insert(std::span<const double> pos, int mark) {
        for (double x : pos) coords.push_back(x);
        marks.push_back(mark);
    }

    void remove_swap(std::size_t i) {
        const std::size_t last = size() - 1;
        for (int a = 0; a < dim; ++a) coords[i * dim + a] = coords[last * dim + a];
        marks[i] = marks[last];
        coords.resize(last * dim);
        marks.resize(last);
    }

    double torus_distance(std::size_t i, std::size_t j) const {
        double r2 = 0.0;
        for (int a = 0; a < dim; ++a) {
            double d = std::fabs(coords[i * dim + a] - coords[j * dim + a]);
            d = std::min(d, box_side - d);
            r2 += d * d;
        }
        return std::sqrt(r2);
    }
};

struct SimParams {
    double kappa = 0.5;     // effective (post-renormalization), < 1
    ImmigrationRate c;
    int dim = 1;
    double box_side = 1.0;
    DispersalKernel alpha = DispersalKernel::uniform_ball(1, 1.0);
    MutationKernel Q;       // renormalized
    std::uint64_t seed = 1;
    double horizon = 100.0;
    double burn_in = 0.0;
    int replicas = 1;
    std::size_t population_cap = 1000000;
    double pair_bin_width = 0.0;  // 0 -> dispersal std / 10

    void validate() const {
        if (!(kappa < 1.0) || !(kappa >= 0.0))
            throw validation_error("simulation.kappa", "effective kappa must lie in [0,1)");
        if (!(box_side > 0.0)) throw validation_error("simulation.L", "must be positive");
        if (!(horizon > burn_in) || burn_in < 0.0)
            throw validation_error("simulation.T", "need T > burn_in >= 0");
        if (replicas < 1) throw validation_error("simulation.replicas", "need >= 1");
        if (c.size() != Q.size()) throw validation_error("c", "mark count differs from Q");
    }

    double volume() const { return std::pow(box_side, dim); }

    double bin_width() const {
        return pair_bin_width > 0.0 ? pair_bin_width : alpha.length_scale_max() / 10.0;
    }

    // Total offspring-production weight of a parent with mark s':
    // B(s') = sum_s Q(s, s') w(s). The wrapped dispersal integrates to one,
    // so the spatial factor drops out.
    std::vector<double> offspring_weight() const {
        const std::size_t m = Q.size();
        std::vector<double> b(m, 0.0);
        for (std::size_t sp = 0; sp < m; ++sp)
            for (std::size_t s = 0; s < m; ++s) b[sp] += Q.entry(s, sp) * Q.marks().weight(s);
        return b;
    }

    double immigration_rate_total() const {
        double t = 0.0;
        for (std::size_t s = 0; s < c.size(); ++s) t += c[s] * Q.marks().weight(s);
        return t * volume();
    }
};

struct RateBreakdown {
    double death = 0.0;
    double contact = 0.0;
    double immigration = 0.0;
    double total() const { return death + contact + immigration; }
};

inline RateBreakdown total_rates(const Configuration& cfg, const SimParams& params) {
    RateBreakdown r;
    r.death = static_cast<double>(cfg.size());
    const std::vector<double> b = params.offspring_weight();
    double sum_b = 0.0;
    for (int mk : cfg.marks) sum_b += b[static_cast<std::size_t>(mk)];
    r.contact = params.kappa * sum_b;
    r.immigration = params.immigration_rate_total();
    return r;
}

enum class EventType { Death, ContactBirth, Immigration };

struct EventRecord {
    EventType type = EventType::Death;
    double holding_time = 0.0;
    int parent_mark = -1;  // contact births only
    int child_mark = -1;   // births only
};

// Ordered-pair separation histogram per mark pair, maintained incrementally.
class PairHistogram {
public:
    PairHistogram() = default;
    PairHistogram(double box_side, double bin_width, int marks)
        : bin_width_(bin_width), marks_(marks) {
        const double r_max = box_side / 2.0;
        bins_ = static_cast<std::size_t>(std::ceil(r_max / bin_width - 1e-9));
        r_max_ = r_max;
        counts_.assign(bins_ * marks_ * marks_, 0.0);
    }

    std::size_t bins() const { return bins_; }
    double bin_lo(std::size_t b) const { return b * bin_width_; }
    double bin_hi(std::size_t b) const { return std::min((b + 1) * bin_width_, r_max_); }

    void adjust(const Configuration& cfg, std::size_t particle, double delta) {
        const int mk = cfg.marks[particle];
        for (std::size_t j = 0; j < cfg.size(); ++j) {
            if (j == particle) continue;
            const double d = cfg.torus_distance(particle, j);
            if (d > r_max_ + 1e-12) continue;
            std::size_t b = static_cast<std::size_t>(d / bin_width_);
            if (b >= bins_) b = bins_ - 1;
            counts_[(b * marks_ + mk) * marks_ + cfg.marks[j]] += delta;
            counts_[(b * marks_ + cfg.marks[j]) * marks_ + mk] += delta;
        }
    }

    const std::vector<double>& counts() const { return counts_; }

private:
    double bin_width_ = 1.0;
    double r_max_ = 1.0;
    int marks_ = 1;
    std::size_t bins_ = 0;
    std::vector<double> counts_;
};

struct EstimatorAccumulators {
    int replica = 0;
    double accumulated_time = 0.0;
    std::vector<double> count_time;         // per mark, integral of counts dt
    std::vector<double> pair_time;          // [bin][s1][s2], integral of ordered-pair counts dt
    std::size_t pair_bins = 0;
    double bin_width = 0.0;

    std::uint64_t deaths = 0;
    std::uint64_t contact_births = 0;
    std::uint64_t immigrations = 0;
    std::vector<std::uint64_t> offspring_marks;  // [parent][child]
    std::size_t initial_population = 0;
    std::size_t final_population = 0;
    std::size_t peak_population = 0;

    void merge(const EstimatorAccumulators& o) {
        accumulated_time += o.accumulated_time;
        for (std::size_t i = 0; i < count_time.size(); ++i) count_time[i] += o.count_time[i];
        for (std::size_t i = 0; i < pair_time.size(); ++i) pair_time[i] += o.pair_time[i];
        deaths += o.deaths;
        contact_births += o.contact_births;
        immigrations += o.immigrations;
        for (std::size_t i = 0; i < offspring_marks.size(); ++i)
            offspring_marks[i] += o.offspring_marks[i];
        final_population += o.final_population;
        peak_population = std::max(peak_population, o.peak_population);
    }
};

// Exact next-event simulation. Death rate is the population size, the
// contact rate is kappa times a running sum of offspring weights, and the
// immigration rate is constant, so every event costs O(1) rate work
// (plus O(|gamma|) histogram maintenance when pair estimation is on).
class ContactSimulator {
public:
    ContactSimulator(const SimParams& params, std::uint64_t seed)
        : params_(params), rng_(seed), b_(params.offspring_weight()) {
        params_.validate();
        cfg_.dim = params_.dim;
        cfg_.box_side = params_.box_side;
        const std::size_t m = params_.Q.size();
        mark_members_.resize(m);
        child_weights_.resize(m, std::vector<double>(m));
        for (std::size_t sp = 0; sp < m; ++sp)
            for (std::size_t s = 0; s < m; ++s)
                child_weights_[sp][s] = params_.Q.entry(s, sp) * params_.Q.marks().weight(s);
        imm_weights_.resize(m);
        for (std::size_t s = 0; s < m; ++s) imm_weights_[s] = params_.c[s] * params_.Q.marks().weight(s);
        imm_total_ = params_.immigration_rate_total();
    }

    const Configuration& configuration() const { return cfg_; }
    Configuration& configuration() { return cfg_; }

    void attach_pair_histogram(double bin_width) {
        hist_ = PairHistogram(params_.box_side, bin_width, static_cast<int>(params_.Q.size()));
        track_pairs_ = true;
    }
    const PairHistogram& pair_histogram() const { return hist_; }

    RateBreakdown rates() const {
        RateBreakdown r;
        r.death = static_cast<double>(cfg_.size());
        r.contact = params_.kappa * sum_b_;
        r.immigration = imm_total_;
        return r;
    }

    // One Gillespie event. Advances cfg_.time by the exponential holding
    // time, then applies the sampled event.
    EventRecord step() {
        const RateBreakdown r = rates();
        if (!(r.total() > 0.0)) throw numeric_error("step: total rate is zero");
        EventRecord rec;
        rec.holding_time = rng_.exponential(r.total());
        cfg_.time += rec.holding_time;

        const double u = rng_.uniform01() * r.total();
        if (u < r.death) {
            rec.type = EventType::Death;
            apply_death(rng_.uniform_index(cfg_.size()));
        } else if (u < r.death + r.contact) {
            rec.type = EventType::ContactBirth;
            apply_contact_birth(rec);
        } else {
            rec.type = EventType::Immigration;
            apply_immigration(rec);
        }
        if ((++events_since_refresh_ & 0xffff) == 0) refresh_contact_sum();
        return rec;
    }

    void insert_particle(std::span<const double> pos, int mark) {
        cfg_.insert(pos, mark);
        mark_members_[mark].push_back(cfg_.size() - 1);
        member_slot_.push_back(mark_members_[mark].size() - 1);
        sum_b_ += b_[static_cast<std::size_t>(mark)];
        if (track_pairs_) hist_.adjust(cfg_, cfg_.size() - 1, +1.0);
    }

private:
    void refresh_contact_sum() {
        double s = 0.0;
        for (int mk : cfg_.marks) s += b_[static_cast<std::size_t>(mk)];
        sum_b_ = s;
    }

    void apply_death(std::size_t victim) {
        if (track_pairs_) hist_.adjust(cfg_, victim, -1.0);
        const int mark = cfg_.marks[victim];
        sum_b_ -= b_[static_cast<std::size_t>(mark)];
        // unhook victim from its mark list
        detach_member(victim);
        const std::size_t last = cfg_.size() - 1;
        if (victim != last) {
            // the swapped-in particle changes index; fix its slot
            const int last_mark = cfg_.marks[last];
            mark_members_[last_mark][member_slot_[last]] = victim;
            member_slot_[victim] = member_slot_[last];
        }
        member_slot_.pop_back();
        cfg_.remove_swap(victim);
    }

    void detach_member(std::size_t particle) {
        const int mark = cfg_.marks[particle];
        auto& members = mark_members_[mark];
        const std::size_t slot = member_slot_[particle];
        const std::size_t moved = members.back();
        members[slot] = moved;
        member_slot_[moved] = slot;
        members.pop_back();
    }

    void apply_contact_birth(EventRecord& rec) {
        // parent class proportional to count * B
        const std::size_t m = params_.Q.size();
        std::vector<double> class_w(m);
        for (std::size_t s = 0; s < m; ++s)
            class_w[s] = static_cast<double>(mark_members_[s].size()) * b_[s];
        const std::size_t parent_mark = rng_.discrete(class_w);
        const auto& members = mark_members_[parent_mark];
        const std::size_t parent = members[rng_.uniform_index(members.size())];

        const std::vector<double> disp = params_.alpha.sample(rng_);
        std::vector<double> pos(params_.dim);
        for (int a = 0; a < params_.dim; ++a) {
            double x = cfg_.coords[parent * params_.dim + a] + disp[a];
            x -= params_.box_side * std::floor(x / params_.box_side);
            if (x >= params_.box_side) x = 0.0;
            pos[a] = x;
        }
        const int child_mark = static_cast<int>(rng_.discrete(child_weights_[parent_mark]));
        insert_particle(pos, child_mark);
        rec.parent_mark = static_cast<int>(parent_mark);
        rec.child_mark = child_mark;
    }

    void apply_immigration(EventRecord& rec) {
        std::vector<double> pos(params_.dim);
        for (int a = 0; a < params_.dim; ++a) pos[a] = rng_.uniform(0.0, params_.box_side);
        const int mark = static_cast<int>(rng_.discrete(imm_weights_));
        insert_particle(pos, mark);
        rec.child_mark = mark;
    }

    SimParams params_;
    Configuration cfg_;
    Rng rng_;
    std::vector<double> b_;
    double sum_b_ = 0.0;
    double imm_total_ = 0.0;
    std::vector<std::vector<std::size_t>> mark_members_;
    std::vector<std::size_t> member_slot_;
    std::vector<std::vector<double>> child_weights_;
    std::vector<double> imm_weights_;
    PairHistogram hist_;
    bool track_pairs_ = false;
    std::uint64_t events_since_refresh_ = 0;
};

// One Gillespie event on a caller-owned configuration. The transient engine
// is seeded from the caller's stream, so repeated calls stay deterministic
// per stream. run_replica uses a persistent engine instead.
inline EventRecord step(Configuration& cfg, const SimParams& params, Rng& rng) {
    ContactSimulator sim(params, rng.raw());
    sim.configuration().time = cfg.time;
    for (std::size_t i = 0; i < cfg.size(); ++i) sim.insert_particle(cfg.position(i), cfg.marks[i]);
    EventRecord rec = sim.step();
    cfg = sim.configuration();
    return rec;
}

// Simulates one replica from the empty configuration to the horizon and
// accumulates time-integrated estimators after burn-in. Deterministic for a
// given (seed, replica) pair.
inline EstimatorAccumulators run_replica(const SimParams& params, int replica) {
    params.validate();
    ContactSimulator sim(params, derive_seed(params.seed, static_cast<std::uint64_t>(replica)));
    sim.attach_pair_histogram(params.bin_width());
    const std::size_t m = params.Q.size();

    EstimatorAccumulators acc;
    acc.replica = replica;
    acc.count_time.assign(m, 0.0);
    acc.pair_bins = sim.pair_histogram().bins();
    acc.bin_width = params.bin_width();
    acc.pair_time.assign(acc.pair_bins * m * m, 0.0);
    acc.offspring_marks.assign(m * m, 0);
    acc.initial_population = 0;

    std::vector<double> mark_counts(m, 0.0);
    double t = 0.0;
    while (t < params.horizon) {
        // estimators integrate the pre-event configuration over the overlap
        // of the holding interval with [burn_in, horizon]
        const std::size_t pre_event_size = sim.configuration().size();
        for (double& v : mark_counts) v = 0.0;
        for (int mk : sim.configuration().marks) mark_counts[static_cast<std::size_t>(mk)] += 1.0;

        const EventRecord rec = sim.step();
        const double t_next = std::min(t + rec.holding_time, params.horizon);
        const double lo = std::max(t, params.burn_in);
        if (t_next > lo) {
            const double dt = t_next - lo;
            acc.accumulated_time += dt;
            for (std::size_t s = 0; s < m; ++s) acc.count_time[s] += mark_counts[s] * dt;
            const auto& counts = sim.pair_histogram().counts();
            for (std::size_t i = 0; i < counts.size(); ++i) acc.pair_time[i] += counts[i] * dt;
        }
        if (t + rec.holding_time >= params.horizon) {
            // the event itself falls beyond the horizon: report the state at
            // the horizon, i.e. before the event
            acc.final_population = pre_event_size;
            return acc;
        }
        t += rec.holding_time;

        switch (rec.type) {
            case EventType::Death: ++acc.deaths; break;
            case EventType::ContactBirth:
                ++acc.contact_births;
                ++acc.offspring_marks[static_cast<std::size_t>(rec.parent_mark) * m +
                                      static_cast<std::size_t>(rec.child_mark)];
                break;
            case EventType::Immigration: ++acc.immigrations; break;
        }
        acc.peak_population = std::max(acc.peak_population, sim.configuration().size());
        if (sim.configuration().size() > params.population_cap)
            throw numeric_error("run_replica: population cap exceeded at t = " + std::to_string(t));
    }
    acc.final_population = sim.configuration().size();
    return acc;
}

inline std::vector<EstimatorAccumulators> run_all_replicas(const SimParams& params, int workers) {
    params.validate();
    const int n = params.replicas;
    std::vector<EstimatorAccumulators> out(static_cast<std::size_t>(n));
    std::vector<std::string> failures(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto work = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                out[static_cast<std::size_t>(i)] = run_replica(params, i);
            } catch (const std::exception& e) {
                failures[static_cast<std::size_t>(i)] = e.what();
            }
        }
    };
    const int nthreads = std::max(1, std::min(workers, n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
    for (int i = 0; i < n; ++i)
        if (!failures[static_cast<std::size_t>(i)].empty())
            throw numeric_error("replica " + std::to_string(i) + ": " + failures[static_cast<std::size_t>(i)]);
    return out;
}

// Time-averaged density per mark, relative to the reference measure:
// counts / (T * L^d * w(s)), with replica-spread standard errors.
inline std::vector<MeanSE> estimate_k1(std::span<const EstimatorAccumulators> accs,
                                       const SimParams& params) {
    const std::size_t m = params.Q.size();
    std::vector<MeanSE> out(m);
    for (std::size_t s = 0; s < m; ++s) {
        std::vector<double> vals;
        for (const auto& acc : accs) {
            if (!(acc.accumulated_time > 0.0))
                throw validation_error("estimate_k1", "replica with zero accumulated time");
            vals.push_back(acc.count_time[s] /
                           (acc.accumulated_time * params.volume() * params.Q.marks().weight(s)));
        }
        out[s] = replica_stats(vals);
    }
    return out;
}

inline double shell_volume(int dim, double r_lo, double r_hi) {
    const double unit = std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0 + 1.0);
    return unit * (std::pow(r_hi, dim) - std::pow(r_lo, dim));
}

struct PairCorrelationEstimate {
    std::vector<double> r_lo, r_hi;
    std::vector<MeanSE> value;     // [bin][s1][s2]
    std::vector<bool> missing;     // bins with no accumulated pairs anywhere
    std::size_t bins = 0;
    int marks = 1;

    const MeanSE& at(std::size_t bin, int s1, int s2) const {
        return value[(bin * marks + s1) * marks + s2];
    }
};

// Standard pair-correlation normalization: ordered-pair time integrals over
// time, volume, shell volume and the mark weights, so a Poisson field gives
// a flat profile at the product of densities.
inline PairCorrelationEstimate estimate_pair_correlation(std::span<const EstimatorAccumulators> accs,
                                                         const SimParams& params) {
    if (accs.empty()) throw validation_error("estimate_pair_correlation", "no replicas");
    const std::size_t m = params.Q.size();
    const std::size_t bins = accs[0].pair_bins;
    const double width = accs[0].bin_width;

    PairCorrelationEstimate est;
    est.bins = bins;
    est.marks = static_cast<int>(m);
    est.value.resize(bins * m * m);
    est.missing.assign(bins * m * m, false);
    for (std::size_t b = 0; b < bins; ++b) {
        est.r_lo.push_back(b * width);
        est.r_hi.push_back(std::min((b + 1) * width, params.box_side / 2.0));
    }
    for (std::size_t b = 0; b < bins; ++b) {
        const double shell = shell_volume(params.dim, est.r_lo[b], est.r_hi[b]);
        for (std::size_t s1 = 0; s1 < m; ++s1)
            for (std::size_t s2 = 0; s2 < m; ++s2) {
                std::vector<double> vals;
                double mass = 0.0;
                for (const auto& acc : accs) {
                    const double raw = acc.pair_time[(b * m + s1) * m + s2];
                    mass += raw;
                    vals.push_back(raw / (acc.accumulated_time * params.volume() * shell *
                                          params.Q.marks().weight(s1) * params.Q.marks().weight(s2)));
                }
                const std::size_t idx = (b * m + s1) * m + s2;
                est.value[idx] = replica_stats(vals);
                est.missing[idx] = mass == 0.0;
            }
    }
    return est;
}

} // namespace subcontact
