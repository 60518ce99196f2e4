#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace castflow::par {

// Number of hardware workers OpenMP would use; 1 when built without it.
int max_workers();

// Runs f(i) for every i in [0, n) across up to `workers` threads
// (workers <= 0 means the OpenMP default). Each call must write only to
// slots keyed by its own index, which keeps results identical for any
// thread count. Exceptions are captured and rethrown after the loop.
void index_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f);

// Dense symmetric n x n matrix of d(i, j) with zero diagonal, row-major.
// The serial form is the reference implementation the parallel kernel is
// tested against bit-for-bit.
std::vector<double> pairwise_matrix_serial(
    std::size_t n, const std::function<double(std::size_t, std::size_t)>& d);
std::vector<double> pairwise_matrix(std::size_t n,
                                    const std::function<double(std::size_t, std::size_t)>& d,
                                    int workers);

}  // namespace castflow::par
