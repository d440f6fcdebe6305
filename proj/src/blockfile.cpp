#include "pinnopf/blockfile.hpp"

#include <charconv>
#include <iomanip>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include "pinnopf/errors.hpp"

namespace pinnopf::io {

void BlockDocument::set(std::string key, std::string value)
{
    for (auto& [k, v] : header) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    header.emplace_back(std::move(key), std::move(value));
}

const std::string& BlockDocument::get(std::string_view key) const
{
    for (const auto& [k, v] : header)
        if (k == key)
            return v;
    throw ParseError(kind + ": missing header field '" + std::string(key) + "'");
}

bool BlockDocument::has(std::string_view key) const
{
    for (const auto& kv : header)
        if (kv.first == key)
            return true;
    return false;
}

void BlockDocument::add_block(std::string name, Eigen::MatrixXd values)
{
    blocks.emplace_back(std::move(name), std::move(values));
}

const Eigen::MatrixXd& BlockDocument::block(std::string_view name) const
{
    for (const auto& [n, m] : blocks)
        if (n == name)
            return m;
    throw ParseError(kind + ": missing block '" + std::string(name) + "'");
}

std::string format_double(double value)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text)
{
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ParseError("not a number: '" + std::string(text) + "'");
    return value;
}

std::string sha256_hex(std::string_view data)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    std::ostringstream out;
    out << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i)
        out << std::setw(2) << static_cast<int>(digest[i]);
    return out.str();
}

namespace {

constexpr std::string_view kChecksumTag = "checksum sha256 ";

void check_token(const std::string& s, const char* what)
{
    if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
        throw Error(std::string("invalid ") + what + " '" + s + "'");
}

} // namespace

void write_document(const BlockDocument& doc, std::ostream& sink)
{
    std::string body;
    body.reserve(1 << 16);
    check_token(doc.kind, "document kind");
    body += doc.kind + "\n";
    body += "schema_version " + std::to_string(doc.schema_version) + "\n";
    for (const auto& [k, v] : doc.header) {
        check_token(k, "header key");
        if (v.find('\n') != std::string::npos)
            throw Error("header value for '" + k + "' contains a newline");
        body += k + " " + v + "\n";
    }
    for (const auto& [name, m] : doc.blocks) {
        check_token(name, "block name");
        body += "block " + name + " " + std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (c)
                    body += ' ';
                body += format_double(m(r, c));
            }
            body += '\n';
        }
    }
    sink << body << kChecksumTag << sha256_hex(body) << "\n";
    if (!sink)
        throw Error("write failed");
}

BlockDocument read_document(std::istream& source, std::string_view expected_kind,
                            int expected_version)
{
    std::string text((std::istreambuf_iterator<char>(source)), std::istreambuf_iterator<char>());
    auto pos = text.rfind(kChecksumTag);
    if (pos == std::string::npos || (pos != 0 && text[pos - 1] != '\n'))
        throw ChecksumError(std::string(expected_kind) + ": checksum line missing (truncated file?)");
    std::string body = text.substr(0, pos);
    std::string stored = text.substr(pos + kChecksumTag.size());
    while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
        stored.pop_back();
    if (stored != sha256_hex(body))
        throw ChecksumError(std::string(expected_kind) + ": checksum mismatch");

    std::istringstream in(body);
    BlockDocument doc;
    std::string line;
    if (!std::getline(in, doc.kind))
        throw ParseError("empty document");
    if (doc.kind != expected_kind)
        throw SchemaError("expected a '" + std::string(expected_kind) + "' document, found '" +
                          doc.kind + "'");
    if (!std::getline(in, line) || line.rfind("schema_version ", 0) != 0)
        throw ParseError(doc.kind + ": missing schema_version");
    doc.schema_version = static_cast<int>(parse_double(std::string_view(line).substr(15)));
    if (doc.schema_version != expected_version)
        throw SchemaError(doc.kind + ": unsupported schema_version " + std::to_string(doc.schema_version) +
                          " (expected " + std::to_string(expected_version) + ")");

    while (std::getline(in, line)) {
        if (line.rfind("block ", 0) == 0) {
            std::istringstream bl(line.substr(6));
            std::string name;
            long rows = -1, cols = -1;
            if (!(bl >> name >> rows >> cols) || rows < 0 || cols < 0)
                throw ParseError(doc.kind + ": bad block header '" + line + "'");
            Eigen::MatrixXd m(rows, cols);
            for (long r = 0; r < rows; ++r) {
                if (!std::getline(in, line))
                    throw ParseError(doc.kind + ": block '" + name + "' is short");
                std::string_view rest(line);
                for (long c = 0; c < cols; ++c) {
                    auto sp = rest.find(' ');
                    std::string_view tok = rest.substr(0, sp);
                    m(r, c) = parse_double(tok);
                    if (sp == std::string_view::npos) {
                        if (c != cols - 1)
                            throw ParseError(doc.kind + ": block '" + name + "' row is short");
                        rest = {};
                    } else {
                        rest.remove_prefix(sp + 1);
                    }
                }
                if (!rest.empty())
                    throw ParseError(doc.kind + ": block '" + name + "' row is long");
            }
            doc.blocks.emplace_back(std::move(name), std::move(m));
        } else {
            auto sp = line.find(' ');
            if (sp == std::string::npos)
                throw ParseError(doc.kind + ": bad header line '" + line + "'");
            doc.header.emplace_back(line.substr(0, sp), line.substr(sp + 1));
        }
    }
    return doc;
}

} // namespace pinnopf::io
