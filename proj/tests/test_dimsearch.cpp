#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "optembed/dimsearch.hpp"

using namespace optembed;

namespace {

// Rigged fitness with a known optimum at the all-ones mask.
double rigged_fitness(const DimensionMask& md) {
    double s = 0.0;
    for (uint32_t v : md.d) s += v;
    return -s;
}

}  // namespace

TEST_CASE("search with zero iterations evaluates the initial population once") {
    SearchParams params;
    params.iterations = 0;
    Rng rng(1);
    SearchResult res = evolutionary_search(rigged_fitness, 8, 8, params, rng);
    CHECK(res.log.size() == params.n_m + params.n_c);
    CHECK(res.best_by_iteration.size() == 1);
    // Best of the initial population, nothing else.
    double best = -1e300;
    for (const auto& e : res.log) best = std::max(best, e.fitness);
    CHECK(res.best_fitness == best);
}

TEST_CASE("best-ever fitness is non-decreasing across iterations") {
    SearchParams params;
    params.iterations = 30;
    Rng rng(2);
    SearchResult res = evolutionary_search(rigged_fitness, 8, 8, params, rng);
    for (size_t i = 1; i < res.best_by_iteration.size(); ++i) {
        CHECK(res.best_by_iteration[i] >= res.best_by_iteration[i - 1]);
    }
    CHECK(res.best_by_iteration.size() == 31);
}

TEST_CASE("population size is constant every iteration") {
    SearchParams params;
    params.iterations = 5;
    params.n_m = 4;
    params.n_c = 3;
    Rng rng(3);
    SearchResult res = evolutionary_search(rigged_fitness, 6, 8, params, rng);
    // 6 evaluation passes (5 iterations + terminal), each over n_m + n_c.
    CHECK(res.log.size() == 6 * 7);
    for (const auto& e : res.log) CHECK(e.candidate < 7);
}

TEST_CASE("search trajectory is reproducible under a fixed rng") {
    SearchParams params;
    params.iterations = 10;
    Rng a(4), b(4);
    SearchResult ra = evolutionary_search(rigged_fitness, 8, 8, params, a);
    SearchResult rb = evolutionary_search(rigged_fitness, 8, 8, params, b);
    REQUIRE(ra.log.size() == rb.log.size());
    for (size_t i = 0; i < ra.log.size(); ++i) {
        CHECK(ra.log[i].mask == rb.log[i].mask);
        CHECK(ra.log[i].fitness == rb.log[i].fitness);
    }
    CHECK(ra.best_mask == rb.best_mask);
}

TEST_CASE("returned mask is the argmax over the evaluation log") {
    SearchParams params;
    params.iterations = 8;
    Rng rng(5);
    SearchResult res = evolutionary_search(rigged_fitness, 8, 8, params, rng);
    for (const auto& e : res.log) CHECK(res.best_fitness >= e.fitness);
    CHECK(rigged_fitness(res.best_mask) == res.best_fitness);
}

TEST_CASE("rigged fitness recovers the all-ones optimum in most seeds") {
    SearchParams params;  // paper defaults: n_m=10, n_c=10, T=30, prob=0.1, k=15
    const DimensionMask want = DimensionMask::full(8, 1);
    int hits = 0;
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        SearchResult res = evolutionary_search(rigged_fitness, 8, 8, params, rng);
        hits += res.best_mask == want;
    }
    CHECK(hits >= 95);
}

TEST_CASE("search log writer emits one row per evaluation") {
    SearchParams params;
    params.iterations = 2;
    Rng rng(6);
    SearchResult res = evolutionary_search(rigged_fitness, 4, 4, params, rng);
    const auto path = std::filesystem::temp_directory_path() / "search_log.tsv";
    write_search_log(path.string(), res.log);
    std::ifstream in(path);
    std::string line;
    size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == res.log.size() + 1);
    std::filesystem::remove(path);
}
