#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "osmac/errors.hpp"

namespace osmac {

// Dense row-major storage: per-row access is contiguous, which is what the
// per-observation loops in this library want.
using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::VectorXd;

/// Immutable full-data container: an n x d covariate matrix and a {0,1}
/// response vector. Validates on construction and is safe to share across
/// threads afterwards.
class Dataset {
  public:
    Dataset(RowMatrixXd x, VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
        if (x_.rows() < 1 || x_.cols() < 1)
            throw SchemaError("dataset must have n >= 1 rows and d >= 1 columns");
        if (y_.size() != x_.rows())
            throw SchemaError("response length does not match covariate rows");
        for (Eigen::Index i = 0; i < x_.rows(); ++i)
            for (Eigen::Index j = 0; j < x_.cols(); ++j)
                if (!std::isfinite(x_(i, j)))
                    throw SchemaError("non-finite covariate", static_cast<std::size_t>(i));
        for (Eigen::Index i = 0; i < y_.size(); ++i)
            if (y_[i] != 0.0 && y_[i] != 1.0)
                throw SchemaError("response not in {0,1}", static_cast<std::size_t>(i));
    }

    const RowMatrixXd& x() const { return x_; }
    const VectorXd& y() const { return y_; }
    Eigen::Index n() const { return x_.rows(); }
    Eigen::Index d() const { return x_.cols(); }

  private:
    RowMatrixXd x_;
    VectorXd y_;
};

/// (#zeros, #ones) of the response vector.
inline std::pair<Eigen::Index, Eigen::Index> class_counts(const Dataset& data) {
    Eigen::Index n1 = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) n1 += data.y()[i] == 1.0;
    return {data.n() - n1, n1};
}

/// Response column selector for CSV ingestion: header name or 0-based index.
using ColumnRef = std::variant<std::string, std::size_t>;

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.emplace_back(line.substr(start));
            break;
        }
        out.emplace_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
        out.back().pop_back();
    return out;
}

inline double parse_double(const std::string& field, std::size_t row) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last)
        throw ParseError("cannot parse numeric field '" + field + "'", row);
    if (!std::isfinite(v))
        throw SchemaError("non-finite value '" + field + "'", row);
    return v;
}

}  // namespace detail

/// Loads a comma-delimited file with a header row. The response column is
/// removed from the covariates; with intercept=true an all-ones column is
/// prepended. Malformed rows raise ParseError with the 1-based data row
/// number; a response outside {0,1} raises SchemaError.
inline Dataset load_csv(const std::string& path, const ColumnRef& response_column,
                        bool intercept) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty file", 0);
    const auto header = detail::split_csv_line(line);

    std::size_t ycol;
    if (std::holds_alternative<std::size_t>(response_column)) {
        ycol = std::get<std::size_t>(response_column);
        if (ycol >= header.size())
            throw SchemaError("response column index out of range");
    } else {
        const auto& name = std::get<std::string>(response_column);
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("response column '" + name + "' not in header");
        ycol = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<double> xs;
    std::vector<double> ys;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++row;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) +
                                 " fields, got " + std::to_string(fields.size()),
                             row);
        for (std::size_t j = 0; j < fields.size(); ++j) {
            const double v = detail::parse_double(fields[j], row);
            if (j == ycol) {
                if (v != 0.0 && v != 1.0)
                    throw SchemaError("response value '" + fields[j] + "' not in {0,1}", row);
                ys.push_back(v);
            } else {
                xs.push_back(v);
            }
        }
    }
    if (row == 0) throw ParseError("no data rows", 0);

    const Eigen::Index n = static_cast<Eigen::Index>(row);
    const Eigen::Index dcov = static_cast<Eigen::Index>(header.size() - 1);
    const Eigen::Index d = dcov + (intercept ? 1 : 0);
    if (d < 1) throw SchemaError("no covariate columns");

    RowMatrixXd x(n, d);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index c = 0;
        if (intercept) x(i, c++) = 1.0;
        for (Eigen::Index j = 0; j < dcov; ++j)
            x(i, c++) = xs[static_cast<std::size_t>(i * dcov + j)];
        y[i] = ys[static_cast<std::size_t>(i)];
    }
    return Dataset(std::move(x), std::move(y));
}

/// Writes `data` with header x1,...,xd,y using shortest round-trip decimals.
inline void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (Eigen::Index j = 0; j < data.d(); ++j) out << 'x' << (j + 1) << ',';
    out << "y\n";
    char buf[32];
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        for (Eigen::Index j = 0; j < data.d(); ++j) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, data.x()(i, j));
            out.write(buf, ptr - buf);
            out << ',';
        }
        out << static_cast<int>(data.y()[i]) << '\n';
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

// Binary cache: "OSMC1", little-endian u64 n, u64 d, row-major f64 x, u8 y.
static_assert(std::endian::native == std::endian::little,
              "binary cache assumes a little-endian host");

inline void save_binary(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write("OSMC1", 5);
    const std::uint64_t n = static_cast<std::uint64_t>(data.n());
    const std::uint64_t d = static_cast<std::uint64_t>(data.d());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&d), 8);
    out.write(reinterpret_cast<const char*>(data.x().data()),
              static_cast<std::streamsize>(sizeof(double) * n * d));
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const std::uint8_t yi = data.y()[i] == 1.0 ? 1 : 0;
        out.write(reinterpret_cast<const char*>(&yi), 1);
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline Dataset load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "OSMC1", 5) != 0)
        throw ParseError("bad magic bytes", 0);
    std::uint64_t n = 0, d = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&d), 8);
    if (!in || n < 1 || d < 1) throw ParseError("bad dimensions", 0);
    RowMatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    in.read(reinterpret_cast<char*>(x.data()),
            static_cast<std::streamsize>(sizeof(double) * n * d));
    VectorXd y(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint8_t yi = 0;
        in.read(reinterpret_cast<char*>(&yi), 1);
        y[static_cast<Eigen::Index>(i)] = yi;
    }
    if (!in) throw ParseError("truncated file", 0);
    return Dataset(std::move(x), std::move(y));
}

}  // namespace osmac
