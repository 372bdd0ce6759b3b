#include <gtest/gtest.h>

#include <sstream>

#include "exbern/snapshot.hpp"
#include "test_util.hpp"

using namespace exbern;

TEST(Snapshot, ScalarRoundTripIsExact) {
    const auto g = build_grid(1.0, 7.5, 9, 16, Spacing::uniform_radial);
    const auto u = sample(g, [](Vec2 x) { return std::sin(x.x) * std::exp(x.y / 3.0) / 7.0; });
    std::stringstream ss;
    write_snapshot(ss, u);
    const auto v = read_scalar_snapshot(ss);
    ASSERT_TRUE(v.grid().same_layout(g));
    EXPECT_EQ(v.grid().spacing(), Spacing::uniform_radial);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(v.values()[k], u.values()[k]);
}

TEST(Snapshot, MappingRoundTripIsExact) {
    const auto g = build_grid(0.5, 3.0, 8, 16);
    const auto w = sample_mapping(g, [](Vec2 x) { return Vec2{x.x / 3.0, -x.y * 1e-17}; });
    std::stringstream ss;
    write_snapshot(ss, w);
    const auto v = read_mapping_snapshot(ss);
    for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_EQ(v.p()[k], w.p()[k]);
        EXPECT_EQ(v.q()[k], w.q()[k]);
    }
}

TEST(Snapshot, RejectsMalformedInput) {
    std::stringstream empty;
    expect_error(ErrorCode::parse_error, [&] { read_scalar_snapshot(empty); });
    std::stringstream bad_header("not-a-field v1 1 2 8 16 log-radial\n");
    expect_error(ErrorCode::parse_error, [&] { read_scalar_snapshot(bad_header); });
    std::stringstream short_body("annular-field v1 1 2 8 16 log-radial\n1\n2\n");
    expect_error(ErrorCode::parse_error, [&] { read_scalar_snapshot(short_body); });
    std::string body = "annular-field v1 1 2 8 16 log-radial\n";
    for (int k = 0; k < 128; ++k) body += "1.5\n";
    std::stringstream one_column(body);
    expect_error(ErrorCode::parse_error, [&] { read_mapping_snapshot(one_column); });
    std::stringstream bad_grid("annular-field v1 2 1 8 16 log-radial\n");
    expect_error(ErrorCode::invalid_radii, [&] { read_scalar_snapshot(bad_grid); });
}
