#include "navlab/parallel.hpp"

#include <omp.h>

namespace navlab {

std::string_view exec_name(Exec e) { return e == Exec::Serial ? "serial" : "parallel"; }

std::optional<Exec> parse_exec(std::string_view name) {
    if (name == "serial") return Exec::Serial;
    if (name == "parallel") return Exec::Parallel;
    return std::nullopt;
}

void set_worker_count(int workers) {
    if (workers > 0) omp_set_num_threads(workers);
}

int worker_count() { return omp_get_max_threads(); }

}  // namespace navlab
