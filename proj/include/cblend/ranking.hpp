#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cblend/output.hpp"

namespace cblend {

/// One participant's ranks, aligned with RankBallots::items; nullopt = not ranked.
struct Ballot {
    std::string id;
    std::vector<std::optional<int>> ranks;
};

/**
 * Ranking answers for one question. A complete ballot is a permutation of
 * 1..n; a partial ballot ranks m < n items with exactly the ranks 1..m.
 */
struct RankBallots {
    std::vector<std::string> items;
    std::vector<Ballot> ballots;
};

struct ItemRank {
    std::string item;
    double mean = 0.0;
    int mode = 0;
    std::size_t count = 0;  // ballots that ranked the item

    bool operator==(const ItemRank&) const = default;
};

/// Throws ValidationError naming the first malformed ballot.
void validate_ballots(const RankBallots& ballots);

/**
 * Mean and mode rank per item over the ballots that ranked it. Mode ties
 * resolve to the lower (better) rank. Result order follows `items`.
 * Throws ValidationError for malformed ballots, no ballots, or an item nobody ranked.
 */
std::vector<ItemRank> aggregate_rankings(const RankBallots& ballots);

/// Method columns of the results table, in column order.
inline const std::vector<std::string> kTableMethods{"alternate", "switch", "unet", "textual"};

/// One table line: a category, a prompt pair and the per-method ranks (matched by item name).
struct RankTableRow {
    std::string category;
    std::string pair;
    std::vector<ItemRank> ranks;
};

/**
 * category, pair, then mean and mode per method in kTableMethods order.
 * Means carry two decimals, modes are integers. Throws LookupError when a row lacks a method.
 */
CsvTable rank_table_csv(const std::vector<RankTableRow>& rows);

/// Reads ballots from CSV: header "ballot,<item>,..." and one line per ballot, blank = unranked.
RankBallots parse_ballots_csv(const CsvTable& table);

} // namespace cblend
