#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

namespace pinnopf::cli {

enum ExitCode : int {
    kSuccess = 0,
    kSolverFailure = 1,
    kUsageError = 2,
    kVerifiedWithGap = 3,
};

/// Runs one CLI invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Resolves "case39" to the bundled case file; a path is returned unchanged.
std::filesystem::path resolve_case(const std::string& name);

/// Markdown tables for a set of evaluation / verification documents.
std::string render_tables(const std::vector<nlohmann::json>& documents);
/// Rows merged by label, in NN, Pg Abs, Pg Sqr, Pg Exp, KKT order.
nlohmann::json merge_rows(const std::vector<nlohmann::json>& documents);

/// "Plain" -> "NN", "PgAbs" -> "Pg Abs", ...; other labels pass through.
std::string display_label(const std::string& label);

} // namespace pinnopf::cli
