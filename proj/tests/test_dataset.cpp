#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <string>

#include "osmac/dataset.hpp"
#include "osmac/rng.hpp"

using namespace osmac;

namespace {

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

Dataset random_dataset(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    RowMatrixXd x(n, d);
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.standard_normal();
        y[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
    }
    // Make sure awkward but representable values survive the round trip.
    x(0, 0) = 1.0 / 3.0;
    x(0, d - 1) = 1e-17;
    x(n - 1, 0) = -12345.678912345678;
    return Dataset(std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("dataset construction validates its invariants") {
    RowMatrixXd x(2, 1);
    x << 1.0, 2.0;
    VectorXd y(2);
    y << 0.0, 1.0;
    REQUIRE_NOTHROW(Dataset(x, y));

    SECTION("response outside {0,1}") {
        y[1] = 2.0;
        REQUIRE_THROWS_AS(Dataset(x, y), SchemaError);
    }
    SECTION("fractional response") {
        y[0] = 0.5;
        REQUIRE_THROWS_AS(Dataset(x, y), SchemaError);
    }
    SECTION("non-finite covariate") {
        x(0, 0) = std::numeric_limits<double>::quiet_NaN();
        REQUIRE_THROWS_AS(Dataset(x, y), SchemaError);
    }
    SECTION("length mismatch") {
        VectorXd bad(3);
        bad << 0, 1, 0;
        REQUIRE_THROWS_AS(Dataset(x, bad), SchemaError);
    }
    SECTION("empty matrix") {
        REQUIRE_THROWS_AS(Dataset(RowMatrixXd(0, 1), VectorXd(0)), SchemaError);
    }
}

TEST_CASE("class_counts tallies zeros and ones") {
    RowMatrixXd x(6, 1);
    x.setOnes();
    VectorXd y(6);
    y << 0, 1, 0, 1, 1, 1;
    const Dataset data(x, y);
    const auto [n0, n1] = class_counts(data);
    REQUIRE(n0 == 2);
    REQUIRE(n1 == 4);
    REQUIRE(n0 + n1 == data.n());
}

TEST_CASE("csv loader parses a small file") {
    const auto path = tmp_file("osmac_small.csv");
    write_file(path, "x,y\n1.0,1\n2.0,0\n");

    SECTION("with intercept") {
        const Dataset data = load_csv(path.string(), std::string("y"), true);
        REQUIRE(data.n() == 2);
        REQUIRE(data.d() == 2);
        REQUIRE(data.x()(0, 0) == 1.0);
        REQUIRE(data.x()(0, 1) == 1.0);
        REQUIRE(data.x()(1, 0) == 1.0);
        REQUIRE(data.x()(1, 1) == 2.0);
        REQUIRE(data.y()[0] == 1.0);
        REQUIRE(data.y()[1] == 0.0);
    }
    SECTION("without intercept") {
        const Dataset data = load_csv(path.string(), std::string("y"), false);
        REQUIRE(data.d() == 1);
        REQUIRE(data.x()(0, 0) == 1.0);
        REQUIRE(data.x()(1, 0) == 2.0);
    }
    SECTION("response by column index") {
        const Dataset data = load_csv(path.string(), std::size_t{1}, false);
        REQUIRE(data.d() == 1);
        REQUIRE(data.y()[0] == 1.0);
    }
}

TEST_CASE("csv loader keeps covariate order around a middle response column") {
    const auto path = tmp_file("osmac_middle.csv");
    write_file(path, "a,y,b\n10,1,20\n30,0,40\n");
    const Dataset data = load_csv(path.string(), std::string("y"), false);
    REQUIRE(data.d() == 2);
    REQUIRE(data.x()(0, 0) == 10.0);
    REQUIRE(data.x()(0, 1) == 20.0);
    REQUIRE(data.x()(1, 0) == 30.0);
    REQUIRE(data.x()(1, 1) == 40.0);
}

TEST_CASE("csv loader accepts CRLF line endings") {
    const auto path = tmp_file("osmac_crlf.csv");
    write_file(path, "x,y\r\n1.5,0\r\n2.5,1\r\n");
    const Dataset data = load_csv(path.string(), std::string("y"), false);
    REQUIRE(data.n() == 2);
    REQUIRE(data.x()(1, 0) == 2.5);
    REQUIRE(data.y()[1] == 1.0);
}

TEST_CASE("csv loader reports malformed input with the data row number") {
    const auto path = tmp_file("osmac_bad.csv");

    SECTION("unparseable numeric field") {
        write_file(path, "x,y\n1.0,1\nnope,0\n");
        try {
            load_csv(path.string(), std::string("y"), false);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(e.row == 2);
        }
    }
    SECTION("response outside {0,1}") {
        write_file(path, "x,y\n1.0,1\n2.0,7\n");
        try {
            load_csv(path.string(), std::string("y"), false);
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            REQUIRE(e.row == 2);
        }
    }
    SECTION("ragged row") {
        write_file(path, "x,y\n1.0,1\n2.0\n");
        REQUIRE_THROWS_AS(load_csv(path.string(), std::string("y"), false), ParseError);
    }
    SECTION("unknown response name") {
        write_file(path, "x,y\n1.0,1\n");
        REQUIRE_THROWS_AS(load_csv(path.string(), std::string("label"), false),
                          SchemaError);
    }
    SECTION("response index out of range") {
        write_file(path, "x,y\n1.0,1\n");
        REQUIRE_THROWS_AS(load_csv(path.string(), std::size_t{2}, false), SchemaError);
    }
    SECTION("empty file") {
        write_file(path, "");
        REQUIRE_THROWS_AS(load_csv(path.string(), std::string("y"), false), ParseError);
    }
    SECTION("header only") {
        write_file(path, "x,y\n");
        REQUIRE_THROWS_AS(load_csv(path.string(), std::string("y"), false), ParseError);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_csv("/nonexistent/osmac.csv", std::string("y"), false),
                          IoError);
    }
}

TEST_CASE("csv round trip is exact") {
    const Dataset data = random_dataset(40, 5, 7);
    const auto path = tmp_file("osmac_roundtrip.csv");
    save_csv(data, path.string());
    const Dataset back = load_csv(path.string(), std::string("y"), false);
    REQUIRE(back.n() == data.n());
    REQUIRE(back.d() == data.d());
    REQUIRE(back.x() == data.x());
    REQUIRE(back.y() == data.y());
}

TEST_CASE("binary cache round trip is exact") {
    const Dataset data = random_dataset(64, 3, 11);
    const auto path = tmp_file("osmac_roundtrip.bin");
    save_binary(data, path.string());
    const Dataset back = load_binary(path.string());
    REQUIRE(back.x() == data.x());
    REQUIRE(back.y() == data.y());
}

TEST_CASE("binary cache rejects damaged files") {
    const auto path = tmp_file("osmac_damaged.bin");

    SECTION("wrong magic") {
        write_file(path, "WRONG???????????????????");
        REQUIRE_THROWS_AS(load_binary(path.string()), ParseError);
    }
    SECTION("truncated payload") {
        const Dataset data = random_dataset(16, 2, 3);
        save_binary(data, path.string());
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
        REQUIRE_THROWS_AS(load_binary(path.string()), ParseError);
    }
}
