#pragma once

namespace rdcfold {

/// Entry point behind the `rdcfold` tool. Subcommands: synth, stage1,
/// stage2, fold, analyze, bench. Returns 0 on success, 1 on usage or
/// validation errors, 2 on runtime failures.
int cli_main(int argc, const char* const* argv);

}  // namespace rdcfold
