#pragma once

#include "proxystream/pipeline.hpp"

#include <cmath>
#include <string>

namespace proxystream::testing {

/// Collects partition-law and proxy-exactness violations seen by a PhaseObserver.
struct PhaseAudit {
    std::size_t phases = 0;
    std::size_t clusters = 0;
    std::vector<std::string> violations;
    bool require_nonempty = true;

    void operator()(const PhaseView& v) {
        ++phases;
        const auto n = v.entities.size();
        const auto& p = v.partition;
        auto fail = [&](const std::string& what) {
            if (violations.size() < 20)
                violations.push_back("t=" + std::to_string(v.t) +
                                     (v.phase == Phase::training ? " train: " : " predict: ") + what);
        };
        if (p.k != v.expected_k) fail("k=" + std::to_string(p.k) + " expected " + std::to_string(v.expected_k));
        if (p.assignment.size() != n) fail("assignment is not total");
        std::vector<std::size_t> seen(p.k, 0);
        for (auto a : p.assignment) {
            if (a >= p.k) fail("cluster index out of range");
            else ++seen[a];
        }
        if (require_nonempty) {
            if (p.medoids.size() != p.k) fail("missing medoids");
            for (std::size_t c = 0; c < p.k && c < p.medoids.size(); ++c) {
                if (seen[c] == 0) fail("empty cluster " + std::to_string(c));
                if (p.medoids[c] >= n || p.assignment[p.medoids[c]] != c) fail("medoid outside its cluster");
            }
        }

        // Proxy exactness, with long double member sums as the reference.
        std::size_t covered = 0;
        for (const auto& proxy : v.proxies) {
            ++clusters;
            covered += proxy.members.size();
            if (proxy.members.empty()) fail("proxy without members");
            const auto width = v.features.front().size();
            const auto count = static_cast<long double>(proxy.members.size());
            for (std::size_t d = 0; d < width; ++d) {
                long double s = 0;
                for (auto m : proxy.members) s += v.features[m][d];
                const auto mean = static_cast<double>(s / count);
                if (std::abs(proxy.x_tilde[d] - mean) > 1e-12 * std::max(1.0, std::abs(mean))) {
                    fail("x_tilde off the member mean");
                    break;
                }
            }
            if (v.outcomes) {
                long double s = 0;
                for (auto m : proxy.members) s += (*v.outcomes)[m];
                const auto mean = static_cast<double>(s / count);
                if (!proxy.y_tilde || std::abs(*proxy.y_tilde - mean) > 1e-12 * std::max(1.0, std::abs(mean)))
                    fail("y_tilde off the member mean");
            }
        }
        if (covered != n) fail("proxies do not cover every entity exactly once");
    }
};

}  // namespace proxystream::testing
