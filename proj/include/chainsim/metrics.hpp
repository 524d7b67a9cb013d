#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chainsim/consensus.hpp"

namespace chainsim {

// One sampled round. CSV columns are exactly these fields in this order.
struct MetricsRow {
    uint64_t round = 0;
    Mode mode = Mode::dishonest;
    double honest_weight = 0;
    double dishonest_weight = 0;
    bool lumpy = false;
    bool thin = false;
    double margin_to_flip = 0;
    uint64_t tip_height = 0;
    uint64_t finalized_height = 0;
    uint32_t blocks_this_round = 0;
    double honest_cost_cum = 0;

    bool operator==(const MetricsRow&) const = default;
};

std::string metrics_csv_header();
std::string to_csv_line(const MetricsRow& row);
std::string to_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> metrics_from_csv(const std::string& text);
void save_metrics(const std::vector<MetricsRow>& rows, const std::string& path);

}  // namespace chainsim
