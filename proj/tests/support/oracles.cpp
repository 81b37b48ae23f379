#include "oracles.hpp"

#include <cmath>
#include <cstddef>

namespace testsupport {

std::vector<bc::BCDecision> heuristic_reference(const std::vector<double>& pitch,
                                                const std::vector<bool>& voiced,
                                                const bc::HeuristicConfig& cfg, bc::Rng& rng) {
    const std::size_t n = pitch.size();
    auto t_of = [&](std::size_t i) { return static_cast<double>(i) * cfg.tick_s; };
    const auto min_samples =
        static_cast<std::size_t>(std::llround(cfg.min_history_s / cfg.tick_s));

    // A tick is "low" when it is voiced, enough voiced history exists in the
    // trailing window (current tick excluded), and its pitch sits strictly
    // below the percentile threshold of that history.
    std::vector<char> low(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(pitch[i] > 0.0)) continue;
        std::size_t count = 0, below = 0;
        for (std::size_t j = 0; j < i; ++j) {
            if (!(pitch[j] > 0.0)) continue;
            if (t_of(j) <= t_of(i) - cfg.buffer_window_s + 1e-9) continue;
            ++count;
            if (pitch[j] < pitch[i]) ++below;
        }
        if (count < min_samples) continue;
        double pct = 100.0 * static_cast<double>(below) / static_cast<double>(count);
        low[i] = pct < cfg.percentile_threshold ? 1 : 0;
    }

    // Continuous-VAD run length at tick i, accumulated the same way the
    // incremental implementation does (repeated addition of tick_s).
    auto speech_run = [&](std::size_t i) {
        std::size_t k = 0;
        for (std::size_t j = i + 1; j-- > 0;) {
            if (!voiced[j]) break;
            ++k;
        }
        double r = 0.0;
        for (std::size_t c = 0; c < k; ++c) r += cfg.tick_s;
        return r;
    };

    // Maximal low runs become scheduled emissions when they qualify. A run
    // still open at the end of the stream never closes, so never schedules.
    std::vector<double> emissions;
    std::size_t i = 0;
    while (i < n) {
        if (!low[i]) {
            ++i;
            continue;
        }
        std::size_t a = i;
        while (i < n && low[i]) ++i;
        std::size_t b = i - 1;
        if (b + 1 >= n) break; // no closing tick
        double region_end = t_of(b) + cfg.tick_s;
        double duration = region_end - t_of(a);
        if (duration >= cfg.min_region_s - 1e-9 && speech_run(b) >= cfg.min_speech_s - 1e-9)
            emissions.push_back(region_end + cfg.emission_delay_s);
    }

    // Emissions fire at the first tick at/after their scheduled time; ones
    // landing inside the cooldown are dropped, ones past the stream never fire.
    std::vector<bc::BCDecision> out;
    if (n == 0) return out;
    double t_last = t_of(n - 1);
    double last_bc = -1e300;
    for (double e : emissions) {
        if (!(e <= t_last + 1e-9)) continue;
        if (e - last_bc >= cfg.cooldown_s - 1e-9) {
            bc::BCDecision d;
            d.t = e;
            d.bc_type = rng.uniform_int(2) == 0 ? bc::BcType::vocal : bc::BcType::nonvocal;
            last_bc = e;
            out.push_back(d);
        }
    }
    return out;
}

namespace {

bool try_augment(std::size_t p, const std::vector<std::vector<std::size_t>>& adj,
                 std::vector<long>& match_of_true, std::vector<char>& visited) {
    for (std::size_t t : adj[p]) {
        if (visited[t]) continue;
        visited[t] = 1;
        if (match_of_true[t] < 0 ||
            try_augment(static_cast<std::size_t>(match_of_true[t]), adj, match_of_true, visited)) {
            match_of_true[t] = static_cast<long>(p);
            return true;
        }
    }
    return false;
}

} // namespace

long max_matching(const std::vector<double>& preds, const std::vector<double>& trues,
                  double margin) {
    std::vector<std::vector<std::size_t>> adj(preds.size());
    for (std::size_t p = 0; p < preds.size(); ++p)
        for (std::size_t t = 0; t < trues.size(); ++t)
            if (std::abs(preds[p] - trues[t]) <= margin) adj[p].push_back(t);
    std::vector<long> match_of_true(trues.size(), -1);
    long matched = 0;
    for (std::size_t p = 0; p < preds.size(); ++p) {
        std::vector<char> visited(trues.size(), 0);
        if (try_augment(p, adj, match_of_true, visited)) ++matched;
    }
    return matched;
}

} // namespace testsupport
