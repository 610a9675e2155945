#include "odsd/tensor_io.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>

#include "odsd/error.hpp"

namespace odsd::io {

namespace {

constexpr char kMagic[4] = {'O', 'D', 'S', 'T'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 1;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    put_u64(out, bits);
}

void write_blob(const std::filesystem::path& path, const std::string& blob) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::string header(std::uint8_t rank) {
    std::string blob(kMagic, sizeof kMagic);
    put_u16(blob, kVersion);
    blob.push_back(static_cast<char>(kDtypeF64));
    blob.push_back(static_cast<char>(rank));
    return blob;
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::size_t offset() const { return offset_; }
    std::size_t remaining() const { return bytes_.size() - offset_; }

    const char* take(std::size_t n, const char* what) {
        if (remaining() < n)
            throw FormatError(std::string("truncated file: expected ") + std::to_string(n) +
                                  " byte(s) of " + what + ", found " +
                                  std::to_string(remaining()),
                              offset_);
        const char* p = bytes_.data() + offset_;
        offset_ += n;
        return p;
    }

    std::uint16_t u16(const char* what) {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(2, what));
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint8_t u8(const char* what) {
        return static_cast<std::uint8_t>(*take(1, what));
    }

    std::uint64_t u64(const char* what) {
        const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8, what));
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        return v;
    }

    double f64(const char* what) {
        const std::uint64_t bits = u64(what);
        double d;
        std::memcpy(&d, &bits, sizeof d);
        return d;
    }

private:
    std::string bytes_;
    std::size_t offset_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

Matrix parse_csv(const std::string& bytes) {
    std::vector<std::vector<double>> rows;
    std::size_t line_start = 0;
    std::size_t cols = 0;
    bool first_line = true;
    while (line_start < bytes.size()) {
        std::size_t line_end = bytes.find('\n', line_start);
        if (line_end == std::string::npos) line_end = bytes.size();
        std::string line = bytes.substr(line_start, line_end - line_start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) {
            bool header_line = false;
            if (first_line) {
                for (char ch : line)
                    if (std::isalpha(static_cast<unsigned char>(ch)) && ch != 'e' && ch != 'E') {
                        header_line = true;
                        break;
                    }
            }
            if (!header_line) {
                std::vector<double> row;
                std::size_t start = 0;
                for (std::size_t i = 0; i <= line.size(); ++i) {
                    if (i == line.size() || line[i] == ',') {
                        const std::string field = line.substr(start, i - start);
                        char* end = nullptr;
                        const double v = std::strtod(field.c_str(), &end);
                        if (end == field.c_str() || *end != '\0')
                            throw FormatError("bad csv number '" + field + "'",
                                              line_start + start);
                        row.push_back(v);
                        start = i + 1;
                    }
                }
                if (cols == 0) cols = row.size();
                if (row.size() != cols)
                    throw FormatError("ragged csv row (" + std::to_string(row.size()) + " vs " +
                                          std::to_string(cols) + " fields)",
                                      line_start);
                rows.push_back(std::move(row));
            }
            first_line = false;
        }
        line_start = line_end + 1;
    }
    if (rows.empty()) throw FormatError("csv with no data rows", 0);
    Matrix m(rows.size(), cols);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    if (!m.all_finite()) throw FormatError("non-finite csv value", 0);
    return m;
}

Matrix parse_odst(const std::string& bytes) {
    Reader r(bytes);
    const char* magic = r.take(4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad magic", 0);
    const std::uint16_t version = r.u16("version");
    if (version != kVersion)
        throw FormatError("unsupported version " + std::to_string(version), 4);
    const std::uint8_t dtype = r.u8("dtype");
    if (dtype != kDtypeF64) throw FormatError("unsupported dtype " + std::to_string(dtype), 6);
    const std::uint8_t rank = r.u8("rank");
    if (rank != 1 && rank != 2) throw FormatError("unsupported rank " + std::to_string(rank), 7);

    std::uint64_t rows = r.u64("dim 0");
    std::uint64_t cols = rank == 2 ? r.u64("dim 1") : 1;
    if (rows == 0 || cols == 0) throw FormatError("zero-sized dimension", 8);
    const std::uint64_t count = rows * cols;
    if (cols != 0 && count / cols != rows) throw FormatError("dimension overflow", 8);
    if (r.remaining() != count * 8)
        throw FormatError("payload size mismatch: expected " + std::to_string(count * 8) +
                              " byte(s), found " + std::to_string(r.remaining()),
                          r.offset());

    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    const std::size_t payload_at = r.offset();
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64("payload");
    if (!m.all_finite()) throw FormatError("non-finite tensor value", payload_at);
    return m;
}

}  // namespace

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
    if (m.empty()) throw ContractViolation("write_matrix: empty matrix");
    std::string blob = header(2);
    put_u64(blob, m.rows());
    put_u64(blob, m.cols());
    for (double v : m.data()) put_f64(blob, v);
    write_blob(path, blob);
}

void write_vector(const std::filesystem::path& path, std::span<const double> v) {
    if (v.empty()) throw ContractViolation("write_vector: empty vector");
    std::string blob = header(1);
    put_u64(blob, v.size());
    for (double x : v) put_f64(blob, x);
    write_blob(path, blob);
}

Matrix read_matrix(const std::filesystem::path& path) {
    const std::string bytes = slurp(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) return parse_odst(bytes);
    return parse_csv(bytes);
}

std::vector<double> read_vector(const std::filesystem::path& path) {
    const Matrix m = read_matrix(path);
    if (m.cols() != 1)
        throw FormatError("expected a rank-1 tensor, found " + std::to_string(m.cols()) +
                              " columns",
                          8);
    return m.data();
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? ",c" : "c") << j;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto row = m.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", row[j]);
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace odsd::io
