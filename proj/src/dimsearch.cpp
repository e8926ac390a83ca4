#include "optembed/dimsearch.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

namespace optembed {

namespace {

struct PoolEntry {
    DimensionMask mask;
    double fitness = 0.0;
    uint64_t discovery = 0;
};

}  // namespace

SearchResult evolutionary_search(const FitnessFn& fitness, size_t n_fields, uint32_t D,
                                 const SearchParams& params, Rng& rng) {
    if (params.n_m + params.n_c == 0) {
        throw std::invalid_argument("evolutionary_search: empty population");
    }
    const size_t pop_size = params.n_m + params.n_c;

    std::vector<DimensionMask> population;
    population.reserve(pop_size);
    for (size_t i = 0; i < pop_size; ++i) population.push_back(sample_dim_mask(rng, n_fields, D));

    SearchResult result;
    std::vector<PoolEntry> topk;
    std::set<std::vector<uint32_t>> seen;  // every mask ever evaluated
    uint64_t discovery_counter = 0;
    bool have_best = false;

    auto evaluate_population = [&](uint32_t iteration) {
        for (size_t c = 0; c < population.size(); ++c) {
            const double f = fitness(population[c]);
            result.log.push_back({iteration, static_cast<uint32_t>(c), population[c], f});
            if (!have_best || f > result.best_fitness) {
                result.best_fitness = f;
                result.best_mask = population[c];
                have_best = true;
            }
            if (seen.insert(population[c].d).second) {
                topk.push_back({population[c], f, discovery_counter++});
            }
        }
        std::sort(topk.begin(), topk.end(), [](const PoolEntry& a, const PoolEntry& b) {
            if (a.fitness != b.fitness) return a.fitness > b.fitness;
            return a.discovery < b.discovery;
        });
        if (topk.size() > params.k) topk.resize(params.k);
        result.best_by_iteration.push_back(result.best_fitness);
    };

    for (uint32_t iter = 0; iter < params.iterations; ++iter) {
        evaluate_population(iter);
        // Children duplicating an already-evaluated mask or an earlier child
        // of this iteration are re-drawn a few times, then admitted; this
        // keeps the population size fixed without letting the pool collapse
        // onto one mask.
        std::set<std::vector<uint32_t>> batch;
        auto fresh_child = [&](auto&& make) {
            DimensionMask child = make();
            for (int attempt = 0;
                 attempt < 10 && (seen.count(child.d) > 0 || batch.count(child.d) > 0);
                 ++attempt) {
                child = make();
            }
            batch.insert(child.d);
            return child;
        };
        std::vector<DimensionMask> next;
        next.reserve(pop_size);
        for (size_t i = 0; i < params.n_c; ++i) {
            next.push_back(fresh_child([&] {
                const size_t a = static_cast<size_t>(rng.uniform_int(0, topk.size() - 1));
                const size_t b = static_cast<size_t>(rng.uniform_int(0, topk.size() - 1));
                return crossover(topk[a].mask, topk[b].mask, rng);
            }));
        }
        for (size_t i = 0; i < params.n_m; ++i) {
            next.push_back(fresh_child([&] {
                const size_t a = static_cast<size_t>(rng.uniform_int(0, topk.size() - 1));
                return mutate(topk[a].mask, params.prob, rng, D);
            }));
        }
        population = std::move(next);
    }
    // The loop builds its last population without evaluating it.
    evaluate_population(static_cast<uint32_t>(params.iterations));

    return result;
}

double evaluate_candidate(CtrModel& supernet, const EmbeddingMask& me_star,
                          const DimensionMask& md, const EncodedDataset& val, size_t eval_batch) {
    if (val.n_rows() == 0) throw std::invalid_argument("evaluate_candidate: empty validation set");
    auto scores = predict(supernet, val, me_star, md, eval_batch);
    return auc(val.labels, scores);
}

void write_search_log(const std::string& path, const std::vector<SearchLogEntry>& log) {
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) throw std::runtime_error("cannot open " + path);
    std::fprintf(out, "iteration\tcandidate\tmask\tfitness\n");
    for (const auto& e : log) {
        std::string mask;
        for (size_t i = 0; i < e.mask.d.size(); ++i) {
            if (i > 0) mask.push_back(',');
            mask += std::to_string(e.mask.d[i]);
        }
        std::fprintf(out, "%u\t%u\t%s\t%.17g\n", e.iteration, e.candidate, mask.c_str(),
                     e.fitness);
    }
    std::fclose(out);
}

}  // namespace optembed
