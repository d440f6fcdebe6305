#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pinnopf::io {

/// Text container shared by dataset and model files:
///
///   <kind>
///   schema_version <int>
///   <key> <value>            (any number of header lines)
///   block <name> <rows> <cols>
///   <row values>             (rows lines, cols values each)
///   ...
///   checksum sha256 <hex>    (over every byte before this line)
struct BlockDocument {
    std::string kind;
    int schema_version = 1;
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> blocks;

    void set(std::string key, std::string value);
    /// Throws ParseError when the key is absent.
    const std::string& get(std::string_view key) const;
    bool has(std::string_view key) const;
    void add_block(std::string name, Eigen::MatrixXd values);
    const Eigen::MatrixXd& block(std::string_view name) const;
};

void write_document(const BlockDocument& doc, std::ostream& sink);

/// Throws ChecksumError on a missing or wrong checksum, SchemaError on a kind
/// or schema_version mismatch, ParseError on malformed content.
BlockDocument read_document(std::istream& source, std::string_view expected_kind,
                            int expected_version);

/// Round-trippable decimal form (17 significant digits).
std::string format_double(double value);
double parse_double(std::string_view text);

std::string sha256_hex(std::string_view data);

} // namespace pinnopf::io
