#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cidl {

// Files written into run and ground-truth directories.
inline constexpr const char* kDictionaryFile = "dictionary.tns";
inline constexpr const char* kCoefficientsFile = "coefficients.tns";
inline constexpr const char* kWeightsFile = "weights.tns";
inline constexpr const char* kDiagnosticsFile = "diagnostics.csv";
inline constexpr const char* kSpikesFile = "spikes.csv";
inline constexpr const char* kTruthInfoFile = "truth.txt";

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2 };

/// Entry point of the `cidl` tool. `args` excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

} // namespace cidl
