#pragma once

#include "inr4d/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace inr4d {

/// Files a stage wrote (relative to run_dir) plus a one-line summary.
struct CommandResult {
    std::vector<std::filesystem::path> produced;
    std::string summary;
};

// Run-directory layout shared by the stages.
namespace layout {
inline std::filesystem::path phantom_dir(const RunConfig& c) { return c.run_dir / "phantom"; }
inline std::filesystem::path pretrain_dir(const RunConfig& c) { return c.run_dir / "pretrain"; }
inline std::filesystem::path refine_dir(const RunConfig& c) { return c.run_dir / "refine"; }
inline std::filesystem::path infer_dir(const RunConfig& c) { return c.run_dir / "infer"; }
inline std::filesystem::path eval_dir(const RunConfig& c) { return c.run_dir / "eval"; }
inline std::filesystem::path outputs_file(const RunConfig& c) { return c.run_dir / "outputs.txt"; }
} // namespace layout

/// Synthetic clean / noisy / label series with manifests.
CommandResult cmd_phantom(const RunConfig& cfg);
/// Splits the time points and fits one model per subset.
CommandResult cmd_pretrain(const RunConfig& cfg);
/// Cross-consistency refinement of the two pre-trained models.
CommandResult cmd_refine(const RunConfig& cfg);
/// Averaged-model reconstruction at the requested times and grid scale.
CommandResult cmd_infer(const RunConfig& cfg);
/// EFC / TC / DICE / MSE report for a series.
CommandResult cmd_eval(const RunConfig& cfg);

/// Dispatches by name ("phantom", "pretrain", "refine", "infer", "eval")
/// and records the produced files in run_dir/outputs.txt.
CommandResult run_command(const std::string& name, const RunConfig& cfg);

} // namespace inr4d
