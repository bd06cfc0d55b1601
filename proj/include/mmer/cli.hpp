#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmer/fusion.hpp"
#include "mmer/gradcheck.hpp"

namespace mmer {

/// Runs one subcommand (synth | train | eval | predict | gradcheck).
/// `args` excludes the program name. Returns 0 on success, 1 on runtime
/// failure, 2 on usage errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Smallest model that still exercises every layer type (GELU, so finite
/// differences never straddle a kink).
FusionConfig tiny_fusion_config(Task task);

/// Finite-difference check of the full model and task loss on five random
/// frames. `cfg` replaces the tiny config when given (its task wins).
GradientReport gradcheck_fusion(Task task, std::uint64_t seed, GradCheckOptions options = {},
                                const FusionConfig* cfg = nullptr);

}  // namespace mmer
