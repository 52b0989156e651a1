#include "spectre/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "spectre/errors.hpp"

namespace spectre {

static_assert(std::endian::native == std::endian::little,
              "rmx I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'M', 'X', '1'};
constexpr std::size_t kHeaderBytes = 12;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError("read failed on " + path);
    return bytes;
}

std::uint32_t read_u32(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
}

}  // namespace

void write_rmx(const std::string& path, const Matrix& m) {
    check_rep_matrix(m, "write_rmx");
    if (m.rows() > static_cast<Index>(UINT32_MAX) ||
        m.cols() > static_cast<Index>(UINT32_MAX))
        throw ParameterError("write_rmx: dimensions exceed the u32 header");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    const std::uint32_t n = static_cast<std::uint32_t>(m.rows());
    const std::uint32_t d = static_cast<std::uint32_t>(m.cols());
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&n), 4);
    out.write(reinterpret_cast<const char*>(&d), 4);
    std::vector<double> row(d);
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) row[static_cast<size_t>(j)] = m(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(8 * row.size()));
    }
    out.flush();
    if (!out) throw DataError("write failed on " + path);
}

Matrix read_rmx(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < kHeaderBytes)
        throw DataError(path + ": truncated header, " +
                        std::to_string(bytes.size()) +
                        " bytes at byte offset 0 (need 12)");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError(path + ": bad magic at byte offset 0 (want RMX1)");
    const std::uint64_t n = read_u32(bytes.data() + 4);
    const std::uint64_t d = read_u32(bytes.data() + 8);
    const std::uint64_t expected = kHeaderBytes + 8 * n * d;
    if (bytes.size() != expected)
        throw DataError(path + ": length " + std::to_string(bytes.size()) +
                        " != expected " + std::to_string(expected) + " for " +
                        std::to_string(n) + "x" + std::to_string(d) +
                        " at byte offset " +
                        std::to_string(std::min<std::uint64_t>(bytes.size(), expected)));
    if (n == 0 || d == 0)
        throw DataError(path + ": empty matrix (header at byte offset 4)");
    Matrix m(static_cast<Index>(n), static_cast<Index>(d));
    const char* p = bytes.data() + kHeaderBytes;
    for (std::uint64_t i = 0; i < n; ++i) {
        for (std::uint64_t j = 0; j < d; ++j) {
            double v;
            std::memcpy(&v, p + 8 * (i * d + j), 8);
            if (!std::isfinite(v))
                throw DataError(path + ": non-finite value at byte offset " +
                                std::to_string(kHeaderBytes + 8 * (i * d + j)));
            m(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }
    }
    return m;
}

Matrix read_csv(const std::string& path) {
    const std::string bytes = read_file(path);
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0, pos = 0;
    while (pos < bytes.size()) {
        std::size_t eol = bytes.find('\n', pos);
        if (eol == std::string::npos) eol = bytes.size();
        std::string_view line(bytes.data() + pos, eol - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (!line.empty()) {
            std::vector<double> vals;
            std::size_t start = 0;
            for (std::size_t col = 1;; ++col) {
                std::size_t comma = line.find(',', start);
                std::string_view tok = line.substr(
                    start, comma == std::string_view::npos ? line.size() - start
                                                           : comma - start);
                while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t'))
                    tok.remove_prefix(1);
                while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t'))
                    tok.remove_suffix(1);
                double v = 0.0;
                auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
                if (ec != std::errc{} || ptr != tok.data() + tok.size())
                    throw DataError(path + ": bad number at line " +
                                    std::to_string(line_no) + ", field " +
                                    std::to_string(col));
                if (!std::isfinite(v))
                    throw DataError(path + ": non-finite value at line " +
                                    std::to_string(line_no) + ", field " +
                                    std::to_string(col));
                vals.push_back(v);
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            if (!rows.empty() && vals.size() != rows.front().size())
                throw DataError(path + ": row width " + std::to_string(vals.size()) +
                                " at line " + std::to_string(line_no) +
                                " != " + std::to_string(rows.front().size()));
            rows.push_back(std::move(vals));
        }
        pos = eol + 1;
    }
    if (rows.empty()) throw DataError(path + ": no data rows");
    Matrix m(static_cast<Index>(rows.size()),
             static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return m;
}

void write_mask(const std::string& path, const Mask& mask) {
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] > 1)
            throw ParameterError("write_mask: byte " + std::to_string(i) +
                                 " is not 0/1");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(mask.data()),
              static_cast<std::streamsize>(mask.size()));
    out.flush();
    if (!out) throw DataError("write failed on " + path);
}

Mask read_mask(const std::string& path) {
    const std::string bytes = read_file(path);
    Mask mask(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const auto b = static_cast<std::uint8_t>(bytes[i]);
        if (b > 1)
            throw DataError(path + ": mask byte at offset " + std::to_string(i) +
                            " is not 0/1");
        mask[i] = b;
    }
    return mask;
}

Matrix read_matrix_auto(const std::string& path) {
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".rmx") == 0)
        return read_rmx(path);
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0)
        return read_csv(path);
    throw ParameterError("read_matrix_auto: unsupported extension on " + path);
}

}  // namespace spectre
