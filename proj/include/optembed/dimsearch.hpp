#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "optembed/masks.hpp"
#include "optembed/pipeline.hpp"

namespace optembed {

// A dimension mask paired with its fitness (validation AUC); NaN until the
// candidate has been evaluated.
struct Candidate {
    DimensionMask mask;
    double fitness = std::numeric_limits<double>::quiet_NaN();
};

struct SearchParams {
    size_t n_m = 10;       // mutation children per iteration
    size_t n_c = 10;       // crossover children per iteration
    size_t iterations = 30;
    double prob = 0.1;     // per-position mutation probability
    size_t k = 15;         // top-k pool size
};

struct SearchLogEntry {
    uint32_t iteration = 0;
    uint32_t candidate = 0;
    DimensionMask mask;
    double fitness = 0.0;
};

struct SearchResult {
    DimensionMask best_mask;
    double best_fitness = 0.0;
    // Best-ever fitness after each evaluation pass (iterations + the terminal
    // pass over the last population).
    std::vector<double> best_by_iteration;
    std::vector<SearchLogEntry> log;
};

using FitnessFn = std::function<double(const DimensionMask&)>;

// Evolutionary search over per-field dimension masks: a population of
// n_m + n_c candidates is evaluated each iteration, merged into a best-ever
// top-k (deduplicated by exact mask, ties broken by earlier discovery), and
// replaced by n_c crossover children of random top-k pairs plus n_m mutation
// children of random top-k members. The loop leaves its last population
// unevaluated, so one terminal evaluation pass runs after it; the returned
// mask is the argmax over every evaluation ever made.
SearchResult evolutionary_search(const FitnessFn& fitness, size_t n_fields, uint32_t D,
                                 const SearchParams& params, Rng& rng);

// Forward-only fitness of one candidate: validation AUC of the frozen supernet
// under (me_star, md). Does not modify the supernet parameters.
double evaluate_candidate(CtrModel& supernet, const EmbeddingMask& me_star,
                          const DimensionMask& md, const EncodedDataset& val, size_t eval_batch);

void write_search_log(const std::string& path, const std::vector<SearchLogEntry>& log);

}  // namespace optembed
