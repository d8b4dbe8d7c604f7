#pragma once

#include <cstddef>
#include <iosfwd>

namespace sgcn::cli {

/// `sgcn synth|train|eval|infer|gradcheck|cost|serve ...`. Structured output
/// goes to `out`, logs and usage text to `err`. Returns 0 on success, 2 on a
/// usage error and 1 on a runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Worker count: hardware concurrency, capped by SGCN_NUM_WORKERS when set.
std::size_t worker_count();

}  // namespace sgcn::cli
