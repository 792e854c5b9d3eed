#include "cblend/ranking.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "cblend/error.hpp"

namespace cblend {
namespace {

std::string ballot_name(const Ballot& b, std::size_t index) {
    return b.id.empty() ? "ballot #" + std::to_string(index) : "ballot '" + b.id + "'";
}

} // namespace

void validate_ballots(const RankBallots& rb) {
    if (rb.items.empty()) throw ValidationError("rankings: no items");
    if (rb.ballots.empty()) throw ValidationError("rankings: no ballots");
    const std::size_t n = rb.items.size();
    for (std::size_t i = 0; i < rb.ballots.size(); ++i) {
        const Ballot& b = rb.ballots[i];
        const std::string name = ballot_name(b, i);
        if (b.ranks.size() != n) {
            throw ValidationError(name + " has " + std::to_string(b.ranks.size()) + " entries for " +
                                  std::to_string(n) + " items");
        }
        std::vector<int> present;
        for (const auto& r : b.ranks)
            if (r) present.push_back(*r);
        if (present.empty()) throw ValidationError(name + " ranks no item");
        std::sort(present.begin(), present.end());
        for (std::size_t k = 0; k < present.size(); ++k) {
            if (present[k] != static_cast<int>(k) + 1) {
                throw ValidationError(name + " is not a ranking 1.." + std::to_string(present.size()) +
                                      " (duplicate, gap or out-of-range rank)");
            }
        }
    }
}

std::vector<ItemRank> aggregate_rankings(const RankBallots& rb) {
    validate_ballots(rb);
    std::vector<ItemRank> out;
    for (std::size_t item = 0; item < rb.items.size(); ++item) {
        std::map<int, std::size_t> freq;
        long long sum = 0;
        std::size_t count = 0;
        for (const auto& b : rb.ballots) {
            if (!b.ranks[item]) continue;
            ++freq[*b.ranks[item]];
            sum += *b.ranks[item];
            ++count;
        }
        if (count == 0) throw ValidationError("rankings: item '" + rb.items[item] + "' was ranked by no ballot");
        int mode = 0;
        std::size_t best = 0;
        for (const auto& [rank, f] : freq) {
            // Ascending rank order, strict > keeps the lower rank on ties.
            if (f > best) {
                best = f;
                mode = rank;
            }
        }
        out.push_back({rb.items[item], static_cast<double>(sum) / static_cast<double>(count), mode, count});
    }
    return out;
}

CsvTable rank_table_csv(const std::vector<RankTableRow>& rows) {
    CsvTable t;
    t.header = {"category", "pair"};
    for (const auto& m : kTableMethods) {
        t.header.push_back(m + "_mean");
        t.header.push_back(m + "_mode");
    }
    for (const auto& row : rows) {
        std::vector<std::string> line{row.category, row.pair};
        for (const auto& m : kTableMethods) {
            auto it = std::find_if(row.ranks.begin(), row.ranks.end(), [&](const ItemRank& r) { return r.item == m; });
            if (it == row.ranks.end()) throw LookupError("rank table: row '" + row.pair + "' lacks method '" + m + "'");
            line.push_back(format_fixed(it->mean, 2));
            line.push_back(std::to_string(it->mode));
        }
        t.rows.push_back(std::move(line));
    }
    return t;
}

RankBallots parse_ballots_csv(const CsvTable& table) {
    if (table.header.size() < 2 || table.header.front() != "ballot") {
        throw ValidationError("ballots csv: header must be 'ballot,<item>,...'");
    }
    RankBallots rb;
    rb.items.assign(table.header.begin() + 1, table.header.end());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Ballot b;
        b.id = row.front();
        for (std::size_t c = 1; c < row.size(); ++c) {
            const std::string& f = row[c];
            if (f.empty()) {
                b.ranks.push_back(std::nullopt);
                continue;
            }
            int v = 0;
            auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || end != f.data() + f.size()) {
                throw ValidationError(ballot_name(b, r) + ": rank '" + f + "' is not an integer");
            }
            b.ranks.push_back(v);
        }
        rb.ballots.push_back(std::move(b));
    }
    return rb;
}

} // namespace cblend
