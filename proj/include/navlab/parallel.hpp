#pragma once

#include <cstddef>
#include <exception>
#include <optional>
#include <string_view>

namespace navlab {

// Execution strategy for batch kernels. Both strategies write results by
// index and reduce in index order, so their outputs are bit-identical.
enum class Exec { Serial, Parallel };

std::string_view exec_name(Exec e);
std::optional<Exec> parse_exec(std::string_view name);

// Sets the OpenMP thread count used by Exec::Parallel (0 keeps the default).
void set_worker_count(int workers);
int worker_count();

template <class F>
void for_each_index(Exec exec, std::size_t n, F&& f) {
    if (exec == Exec::Serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            f(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(navlab_for_each_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace navlab
