#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cblend/error.hpp"
#include "cblend/ranking.hpp"

using namespace cblend;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(CBLEND_FIXTURE_DIR) + "/" + name, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RankBallots ballots(std::vector<std::string> items, std::vector<std::vector<std::optional<int>>> rows) {
    RankBallots rb;
    rb.items = std::move(items);
    for (std::size_t i = 0; i < rows.size(); ++i) rb.ballots.push_back({"v" + std::to_string(i), rows[i]});
    return rb;
}

} // namespace

TEST_SUITE("ranking") {
TEST_CASE("two opposite ballots tie on mean and take the lower mode") {
    const auto r = aggregate_rankings(ballots({"x", "y"}, {{1, 2}, {2, 1}}));
    CHECK(r[0] == ItemRank{"x", 1.5, 1, 2});
    CHECK(r[1] == ItemRank{"y", 1.5, 1, 2});
}

TEST_CASE("a single ballot is its own mean and mode") {
    const auto r = aggregate_rankings(ballots({"a", "b", "c", "d"}, {{3, 1, 4, 2}}));
    const int expect[] = {3, 1, 4, 2};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(r[i].mean == expect[i]);
        CHECK(r[i].mode == expect[i]);
        CHECK(r[i].count == 1);
    }
}

TEST_CASE("partial ballots and ties from the fixture file") {
    const auto r = aggregate_rankings(parse_ballots_csv(parse_csv(read_fixture("ballots_partial.csv"))));
    REQUIRE(r.size() == 4);
    CHECK(r[0] == ItemRank{"alternate", 1.5, 1, 4});
    CHECK(r[1] == ItemRank{"switch", 1.75, 1, 4});
    CHECK(r[2] == ItemRank{"unet", 2.5, 1, 4});
    CHECK(r[3] == ItemRank{"textual", 3.25, 4, 4});
}

TEST_CASE("malformed ballots are validation errors naming the ballot") {
    auto check_named = [](const RankBallots& rb, const std::string& name) {
        try {
            aggregate_rankings(rb);
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find(name) != std::string::npos);
        }
    };
    check_named(ballots({"a", "b"}, {{1, 2}, {1, 1}}), "v1");
    check_named(ballots({"a", "b", "c"}, {{1, 2, 3}, {1, 3, std::nullopt}}), "v1");
    check_named(ballots({"a", "b"}, {{1, 2}, {0, 1}}), "v1");
    check_named(ballots({"a", "b"}, {{1, 2}, {1}}), "v1");
    CHECK_THROWS_AS(aggregate_rankings(ballots({"a", "b"}, {})), ValidationError);
    CHECK_THROWS_AS(aggregate_rankings(ballots({"a", "b"}, {{1, std::nullopt}})), ValidationError);
}

TEST_CASE("non-integer ranks in CSV are validation errors") {
    CsvTable t;
    t.header = {"ballot", "a", "b"};
    t.rows = {{"z9", "1", "two"}};
    CHECK_THROWS_AS(parse_ballots_csv(t), ValidationError);
    t.header = {"voter", "a"};
    CHECK_THROWS_AS(parse_ballots_csv(t), ValidationError);
}

TEST_CASE("table output reproduces the results-table layout byte for byte") {
    const std::string fixture = read_fixture("rank_table_layout.csv");
    const CsvTable parsed = parse_csv(fixture);
    REQUIRE(parsed.rows.size() == 24);
    std::vector<RankTableRow> rows;
    for (const auto& line : parsed.rows) {
        RankTableRow row{line[0], line[1], {}};
        // Supply methods out of column order; the table must reorder them.
        for (std::size_t m = kTableMethods.size(); m-- > 0;) {
            row.ranks.push_back({kTableMethods[m], std::stod(line[2 + 2 * m]), std::stoi(line[3 + 2 * m]), 23});
        }
        rows.push_back(std::move(row));
    }
    const CsvTable out = rank_table_csv(rows);
    CHECK(out.header == parsed.header);
    CHECK(out.to_string() == fixture);
}

TEST_CASE("aggregated ballots feed the table") {
    const auto r = aggregate_rankings(parse_ballots_csv(parse_csv(read_fixture("ballots_partial.csv"))));
    const auto t = rank_table_csv({RankTableRow{"Synthetic", "A-B", r}});
    CHECK(t.rows.at(0) ==
          std::vector<std::string>{"Synthetic", "A-B", "1.50", "1", "1.75", "1", "2.50", "1", "3.25", "4"});
    CHECK_THROWS_AS(rank_table_csv({RankTableRow{"X", "Y", {r[0]}}}), LookupError);
}
}
