#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/campaign/records.hpp"
#include "ensemble/error.hpp"
#include "ensemble/rng.hpp"

namespace ensemble {

/// A synthetic compound. Scores are docking-like: lower is better.
struct LigandRecord {
    std::string ligand_id;
    std::string smiles_like_token;
    double true_score = 0.0;
    double predicted_score = std::numeric_limits<double>::quiet_NaN();
};

using Library = std::vector<LigandRecord>;

inline std::string ligand_id(std::size_t i, std::size_t n) {
    std::size_t width = 6;
    for (std::size_t m = n > 0 ? n - 1 : 0; m >= 1000000; m /= 10)
        ++width;
    std::string digits = std::to_string(i);
    return "L" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

/// n compounds with standard-normal latent scores, determined by `seed`.
inline Library generate_library(std::size_t n, std::uint64_t seed) {
    static constexpr char alphabet[] = "CCCCNNOOSFcccnno()=#123";
    Library lib;
    lib.reserve(n);
    Rng rng = derived_rng(seed, "library");
    std::normal_distribution<double> score(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, sizeof(alphabet) - 2);
    std::uniform_int_distribution<int> length(8, 24);
    for (std::size_t i = 0; i < n; ++i) {
        LigandRecord r;
        r.ligand_id = ligand_id(i, n);
        const int len = length(rng);
        r.smiles_like_token.reserve(static_cast<std::size_t>(len));
        for (int c = 0; c < len; ++c)
            r.smiles_like_token += alphabet[pick(rng)];
        r.true_score = score(rng);
        lib.push_back(std::move(r));
    }
    return lib;
}

/// Surrogate prediction: true score plus N(0, noise_sigma) noise.
inline Library surrogate_scores(Library lib, double noise_sigma, std::uint64_t seed) {
    if (!(noise_sigma >= 0.0))
        throw ValidationError("surrogate_scores: noise_sigma must be >= 0");
    Rng rng = derived_rng(seed, "surrogate");
    std::normal_distribution<double> noise(0.0, 1.0);
    for (auto& r : lib)
        r.predicted_score = r.true_score + noise_sigma * noise(rng);
    return lib;
}

inline analysis::ScoredSet to_scored_set(const Library& lib) {
    std::vector<analysis::ScoredEntry> items;
    items.reserve(lib.size());
    for (const auto& r : lib)
        items.push_back({r.ligand_id, r.true_score, r.predicted_score});
    return analysis::ScoredSet(std::move(items));
}

/// Noise level at which a surrogate keeps, on average, half of the true
/// top 1e-4 of a library within its top 1e-3. Found with
/// calibrate_noise(100000, 0.5, 200 seeds, 22 bisection steps).
inline constexpr double kCalibratedNoiseSigma = 0.751357;

/// Mean recall(k = top_fraction*u, delta = budget_fraction*u) over `seeds`
/// libraries of size u at the given noise.
inline double mean_recall_at(double noise_sigma, std::size_t u, std::size_t seeds, double top_fraction = 1e-4,
                             double budget_fraction = 1e-3, std::uint64_t seed0 = 1000) {
    double sum = 0.0;
    const std::size_t k = analysis::count_for_fraction(top_fraction, u);
    const std::size_t delta = analysis::count_for_fraction(budget_fraction, u);
    for (std::size_t s = 0; s < seeds; ++s) {
        auto lib = surrogate_scores(generate_library(u, seed0 + s), noise_sigma, seed0 + s);
        sum += analysis::top_k_recall(to_scored_set(lib), k, delta);
    }
    return sum / static_cast<double>(seeds);
}

/// Bisection on noise_sigma for a target mean recall (recall decreases
/// with noise). Uses common random numbers across probes.
inline double calibrate_noise(std::size_t u, double target_recall, std::size_t seeds, double lo = 0.0,
                              double hi = 2.0, int iterations = 30, double top_fraction = 1e-4,
                              double budget_fraction = 1e-3) {
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mean_recall_at(mid, u, seeds, top_fraction, budget_fraction) > target_recall)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline void write_library_csv(std::ostream& os, const Library& lib) {
    os << "ligand_id,true_score,predicted_score\n";
    std::string line;
    for (const auto& r : lib) {
        line = r.ligand_id;
        line += ',';
        append_number(line, r.true_score);
        line += ',';
        if (!std::isnan(r.predicted_score))
            append_number(line, r.predicted_score);
        os << line << '\n';
    }
}

/// Reads ligand_id,true_score,predicted_score rows (header required).
inline Library read_library_csv(std::istream& is) {
    Library lib;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (!header) {
            if (line != "ligand_id,true_score,predicted_score")
                throw InputError("expected header 'ligand_id,true_score,predicted_score'", line_no);
            header = true;
            continue;
        }
        auto f = split(line, ',');
        if (f.size() != 3 || f[0].empty())
            throw InputError("expected 3 fields", line_no);
        LigandRecord r;
        r.ligand_id = std::string(f[0]);
        r.true_score = parse_double(f[1], line_no);
        if (!f[2].empty())
            r.predicted_score = parse_double(f[2], line_no);
        lib.push_back(std::move(r));
    }
    if (!header)
        throw InputError("empty scores file");
    return lib;
}

} // namespace ensemble
