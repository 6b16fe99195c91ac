#include "date/mds.hpp"

#include "date/error.hpp"
#include "date/seed.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>

namespace date {

double log_bar(std::size_t k) {
    double s = 0.5;
    for (std::size_t i = 2; i <= k; ++i) s += 1.0 / static_cast<double>(i);
    return s;
}

std::vector<std::size_t> sar_schedule(std::size_t k, std::size_t n) {
    if (k < 2) throw ConfigError("SAR needs at least 2 arms");
    if (n <= k) throw ConfigError("budget n=" + std::to_string(n) + " must exceed the arm count K=" + std::to_string(k));
    const double lb = log_bar(k);
    std::vector<std::size_t> out;
    for (std::size_t phase = 1; phase < k; ++phase) {
        double v = static_cast<double>(n - k) / (lb * static_cast<double>(k + 1 - phase));
        out.push_back(static_cast<std::size_t>(std::ceil(v - 1e-12)));
    }
    return out;
}

double normalized_rho(double rho_k, Task task, double global_rho) {
    if (task == Task::Classification) return rho_k;
    if (!(global_rho > 0.0)) throw ArgumentError("global rho must be positive");
    return std::clamp(rho_k / global_rho, 0.0, 1.0);
}

double utility(double rho, double div, double alpha) { return alpha * (1.0 - rho) + (1.0 - alpha) * div; }

ErrorBound error_bound(std::size_t k, std::size_t n, std::span<const double> mu) {
    if (k < 1) throw ArgumentError("error bound needs K >= 1");
    std::vector<double> gaps;
    for (double m : mu) {
        if (m == 0.0) return {1.0, false};
        gaps.push_back(std::abs(m));
    }
    if (gaps.empty()) return {1.0, false};
    std::sort(gaps.begin(), gaps.end());
    double s = 0.0;
    for (std::size_t i = 0; i < gaps.size(); ++i) s = std::max(s, static_cast<double>(i + 1) / (gaps[i] * gaps[i]));
    double kk = static_cast<double>(k);
    double v = 2.0 * kk * kk *
               std::exp(-(static_cast<double>(n) - kk) / (2.0 * log_bar(k) * s));
    return {std::min(v, 1.0), true};
}

std::size_t successive_rejects(std::span<const double> means, std::size_t n, std::uint64_t seed) {
    const std::size_t k = means.size();
    if (k == 1) return 0;
    auto schedule = sar_schedule(k, n);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> active(k);
    std::iota(active.begin(), active.end(), 0);
    std::vector<double> sum(k, 0.0);
    std::vector<std::size_t> pulls(k, 0);
    for (std::size_t phase = 0; phase + 1 < k; ++phase) {
        for (auto a : active) {
            std::bernoulli_distribution reward(means[a]);
            while (pulls[a] < schedule[phase]) {
                sum[a] += reward(rng) ? 1.0 : 0.0;
                ++pulls[a];
            }
        }
        auto worst = std::min_element(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
            double ma = pulls[a] ? sum[a] / static_cast<double>(pulls[a]) : 0.0;
            double mb = pulls[b] ? sum[b] / static_cast<double>(pulls[b]) : 0.0;
            if (ma != mb) return ma < mb;
            return a > b;
        });
        active.erase(worst);
    }
    return active.front();
}

double arm_diversity(const Dgr& rule, const std::string& model_id, std::span<const Example> context,
                     std::span<const ArmCandidate> accepted, OverlapMode mode) {
    std::vector<WeightedRule> ctx;
    for (const auto& e : context) {
        if (e.model_id == model_id) ctx.push_back({e.rule, static_cast<double>(e.data.size())});
    }
    for (const auto& a : accepted) ctx.push_back({a.rule, static_cast<double>(a.data.size())});
    if (ctx.empty()) return 0.0;
    return diversity(rule, ctx, mode);
}

namespace {

Table union_rows(const Table& base, std::span<const ArmCandidate> arms, std::span<const std::size_t> subset) {
    Table out = base;
    for (auto i : subset) out = union_of(out, arms[i].data);
    return out;
}

class Bandit {
public:
    Bandit(std::span<const ArmCandidate> arms, std::span<const Example> context, const Table& train, const Table& val,
           const MdsConfig& cfg)
        : arms_(arms), context_(context), train_(train), val_(val), cfg_(cfg), q_sum_(arms.size(), 0.0),
          q_n_(arms.size(), 0), div_(arms.size(), 0.0), grown_(arms.size()) {
        base_table_ = train;
        base_tree_ = train_tree(base_table_);
    }

    MdsResult run(std::vector<std::size_t> active) {
        MdsResult res;
        const Task task = train_.schema().task();
        for (auto a : active) {
            q_sum_[a] = 1.0 - normalized_rho(arms_[a].rho_k, task, cfg_.global_rho);
            q_n_[a] = 1;
            div_[a] = arm_diversity(arms_[a].rule, arms_[a].model_id, context_, {}, cfg_.overlap);
        }
        for (std::size_t a = 0; a < arms_.size(); ++a) {
            res.initial_u.push_back(q_n_[a] ? u(a) : 0.0);
            res.initial_div.push_back(div_[a]);
        }
        const std::size_t k = active.size();
        res.schedule = sar_schedule(k, cfg_.budget);
        double bs = 0.0;
        std::size_t stale = 0;
        std::size_t prev = 0;
        for (std::size_t phase = 1; phase < k && active.size() > 1; ++phase) {
            std::size_t each = res.schedule[phase - 1] - prev;
            prev = res.schedule[phase - 1];
            for (auto a : active) {
                for (std::size_t p = 0; p < each && res.total_pulls < cfg_.budget; ++p) {
                    res.pulls.push_back(pull(phase, a, res.total_pulls));
                    ++res.total_pulls;
                }
            }
            // argmax of u plus exploration bonus; ties: larger delta, then earlier arm
            std::size_t pick = active.front();
            double pick_score = -std::numeric_limits<double>::infinity();
            for (auto a : active) {
                double bonus = res.total_pulls > 0
                                   ? cfg_.ucb_c * std::sqrt(std::log(static_cast<double>(res.total_pulls)) /
                                                            static_cast<double>(q_n_[a]))
                                   : 0.0;
                double s = u(a) + bonus;
                if (s > pick_score || (s == pick_score && (arms_[a].delta > arms_[pick].delta ||
                                                           (arms_[a].delta == arms_[pick].delta && a < pick)))) {
                    pick = a;
                    pick_score = s;
                }
            }
            active.erase(std::find(active.begin(), active.end(), pick));
            MdsPhase ph{phase, each, pick, u(pick), pick_score, bs, false};
            if (ph.u >= bs) {
                bool improved = ph.u > bs;
                bs = ph.u;
                ph.accepted = true;
                res.accepted.push_back(pick);
                accept(pick, active);
                stale = improved ? 0 : stale + 1;
            } else {
                ++stale;
            }
            res.phases.push_back(ph);
            res.best_trace.push_back(bs);
            if (stale >= cfg_.patience) break;
        }
        return res;
    }

private:
    TreeModel train_tree(const Table& t) const { return date::train(t, cfg_.hyper, "mds"); }

    double u(std::size_t a) const {
        return utility(1.0 - q_sum_[a] / static_cast<double>(q_n_[a]), div_[a], cfg_.alpha);
    }

    MdsPull pull(std::size_t phase, std::size_t a, std::size_t serial) {
        if (!grown_[a]) grown_[a] = train_tree(union_of(base_table_, arms_[a].data));
        std::mt19937_64 rng(mix_seed(cfg_.seed, {phase, a, serial}));
        std::uniform_int_distribution<std::size_t> pick(0, val_.size() - 1);
        double e0 = 0.0, e1 = 0.0;
        for (std::size_t i = 0; i < val_.size(); ++i) {
            const Record& r = val_.row(pick(rng));
            e0 += row_error(*base_tree_, r);
            e1 += row_error(*grown_[a], r);
        }
        double delta = (e0 - e1) / static_cast<double>(val_.size());
        double rho = normalized_rho(arms_[a].rho_m - delta, train_.schema().task(), cfg_.global_rho);
        double q = 1.0 - rho;
        q_sum_[a] += q;
        ++q_n_[a];
        return {phase, a, delta, q};
    }

    void accept(std::size_t a, const std::vector<std::size_t>& active) {
        accepted_.push_back(arms_[a]);
        base_table_ = union_of(base_table_, arms_[a].data);
        base_tree_ = train_tree(base_table_);
        for (auto& g : grown_) g.reset();
        for (auto r : active) {
            div_[r] = arm_diversity(arms_[r].rule, arms_[r].model_id, context_, accepted_, cfg_.overlap);
        }
    }

    std::span<const ArmCandidate> arms_;
    std::span<const Example> context_;
    const Table& train_;
    const Table& val_;
    const MdsConfig& cfg_;
    std::vector<double> q_sum_;
    std::vector<std::size_t> q_n_;
    std::vector<double> div_;
    std::vector<std::optional<TreeModel>> grown_;
    std::vector<ArmCandidate> accepted_;
    Table base_table_ = train_;
    std::optional<TreeModel> base_tree_;
};

}  // namespace

MdsResult run_mds(std::span<const ArmCandidate> arms, std::span<const Example> context, const Table& train,
                  const Table& val, const MdsConfig& cfg) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0) && cfg.alpha != 1.0) throw ConfigError("alpha must be in (0, 1]");
    if (val.empty()) throw ArgumentError("MDS needs a nonempty validation table");
    MdsResult res;
    if (arms.size() < 2) {
        res.degenerate = true;
        if (arms.size() == 1 && arms[0].delta > 0.0) res.accepted.push_back(0);
        spdlog::info("MDS: {} arm(s), bandit skipped", arms.size());
        return res;
    }
    std::vector<std::size_t> active(arms.size());
    std::iota(active.begin(), active.end(), 0);
    std::vector<std::size_t> truncated;
    if (arms.size() >= cfg.budget) {
        std::stable_sort(active.begin(), active.end(),
                         [&](std::size_t a, std::size_t b) { return arms[a].delta > arms[b].delta; });
        std::size_t keep = cfg.budget > 1 ? cfg.budget - 1 : 1;
        truncated.assign(active.begin() + static_cast<std::ptrdiff_t>(keep), active.end());
        active.resize(keep);
        std::sort(active.begin(), active.end());
        spdlog::info("MDS: {} arms exceed the budget, kept the {} with the largest delta", arms.size(), keep);
    }
    if (active.size() < 2) {
        res.degenerate = true;
        if (!active.empty() && arms[active[0]].delta > 0.0) res.accepted.push_back(active[0]);
        res.truncated = truncated;
        return res;
    }
    res = Bandit(arms, context, train, val, cfg).run(active);
    res.truncated = std::move(truncated);
    return res;
}

std::string to_string(Selector s) {
    switch (s) {
        case Selector::Mds: return "mds";
        case Selector::Fgs: return "fgs";
        case Selector::Bgs: return "bgs";
        case Selector::TopM: return "topm";
    }
    return "mds";
}

Selector selector_from_string(const std::string& s) {
    if (s == "mds") return Selector::Mds;
    if (s == "fgs") return Selector::Fgs;
    if (s == "bgs") return Selector::Bgs;
    if (s == "topm") return Selector::TopM;
    throw ConfigError("unknown selector '" + s + "' (expected mds, fgs, bgs or topm)");
}

double subset_score(std::span<const ArmCandidate> arms, std::span<const std::size_t> subset, const Table& train,
                    const Table& val, const TreeHyper& hyper) {
    Table t = union_rows(train, arms, subset);
    return subset_error(date::train(t, hyper, "score"), val);
}

std::vector<std::size_t> forward_greedy(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                                        const TreeHyper& hyper) {
    std::vector<std::size_t> chosen;
    double current = subset_score(arms, chosen, train, val, hyper);
    while (chosen.size() < arms.size()) {
        std::optional<std::size_t> best;
        double best_score = current;
        for (std::size_t a = 0; a < arms.size(); ++a) {
            if (std::find(chosen.begin(), chosen.end(), a) != chosen.end()) continue;
            auto trial = chosen;
            trial.push_back(a);
            double s = subset_score(arms, trial, train, val, hyper);
            if (s < best_score) {
                best_score = s;
                best = a;
            }
        }
        if (!best) break;
        chosen.push_back(*best);
        current = best_score;
    }
    return chosen;
}

std::vector<std::size_t> backward_greedy(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                                         const TreeHyper& hyper) {
    std::vector<std::size_t> kept(arms.size());
    std::iota(kept.begin(), kept.end(), 0);
    double current = subset_score(arms, kept, train, val, hyper);
    while (!kept.empty()) {
        std::optional<std::size_t> drop;
        double best_score = current;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            auto trial = kept;
            trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
            double s = subset_score(arms, trial, train, val, hyper);
            if (s < best_score) {
                best_score = s;
                drop = i;
            }
        }
        if (!drop) break;
        kept.erase(kept.begin() + static_cast<std::ptrdiff_t>(*drop));
        current = best_score;
    }
    return kept;
}

std::vector<std::size_t> top_m(std::span<const ArmCandidate> arms, const Table& train, const Table& val,
                               const TreeHyper& hyper, std::size_t m) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        std::size_t one[] = {a};
        scored.emplace_back(subset_score(arms, one, train, val, hyper), a);
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scored.size() && i < m; ++i) out.push_back(scored[i].second);
    return out;
}

nlohmann::json to_json(const MdsResult& r) {
    nlohmann::json pulls = nlohmann::json::array();
    for (const auto& p : r.pulls) {
        pulls.push_back({{"phase", p.phase}, {"arm", p.arm}, {"delta", p.delta}, {"quality", p.quality}});
    }
    nlohmann::json phases = nlohmann::json::array();
    for (const auto& p : r.phases) {
        phases.push_back({{"phase", p.phase},
                          {"pulls_per_arm", p.pulls_per_arm},
                          {"selected", p.selected},
                          {"u", p.u},
                          {"score", p.score},
                          {"best_before", p.best_before},
                          {"accepted", p.accepted}});
    }
    return {{"schedule", r.schedule},  {"initial_u", r.initial_u}, {"initial_div", r.initial_div},
            {"pulls", pulls},          {"phases", phases},         {"accepted", r.accepted},
            {"best_trace", r.best_trace}, {"total_pulls", r.total_pulls}, {"degenerate", r.degenerate},
            {"truncated", r.truncated}};
}

}  // namespace date
