#include "chainsim/metrics.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace chainsim {

std::string metrics_csv_header() {
    return "round,mode,honest_weight,dishonest_weight,lumpy,thin,margin_to_flip,tip_height,"
           "finalized_height,blocks_this_round,honest_cost_cum";
}

namespace {
// %.17g keeps doubles round-trippable through text.
std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
}  // namespace

std::string to_csv_line(const MetricsRow& r) {
    std::ostringstream out;
    out << r.round << ',' << to_string(r.mode) << ',' << fmt_double(r.honest_weight) << ','
        << fmt_double(r.dishonest_weight) << ',' << (r.lumpy ? 1 : 0) << ',' << (r.thin ? 1 : 0)
        << ',' << fmt_double(r.margin_to_flip) << ',' << r.tip_height << ',' << r.finalized_height
        << ',' << r.blocks_this_round << ',' << fmt_double(r.honest_cost_cum);
    return out.str();
}

std::string to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << metrics_csv_header() << "\n";
    for (const MetricsRow& r : rows) out << to_csv_line(r) << "\n";
    return out.str();
}

std::vector<MetricsRow> metrics_from_csv(const std::string& text) {
    std::vector<MetricsRow> rows;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != metrics_csv_header()) throw std::runtime_error("metrics csv: bad header");
            continue;
        }
        std::vector<std::string> cols;
        std::istringstream ls(line);
        std::string col;
        while (std::getline(ls, col, ',')) cols.push_back(col);
        if (cols.size() != 11) throw std::runtime_error("metrics csv: bad column count");
        MetricsRow r;
        r.round = std::stoull(cols[0]);
        r.mode = cols[1] == "honest" ? Mode::honest : Mode::dishonest;
        r.honest_weight = std::stod(cols[2]);
        r.dishonest_weight = std::stod(cols[3]);
        r.lumpy = cols[4] == "1";
        r.thin = cols[5] == "1";
        r.margin_to_flip = std::stod(cols[6]);
        r.tip_height = std::stoull(cols[7]);
        r.finalized_height = std::stoull(cols[8]);
        r.blocks_this_round = static_cast<uint32_t>(std::stoul(cols[9]));
        r.honest_cost_cum = std::stod(cols[10]);
        rows.push_back(r);
    }
    return rows;
}

void save_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << to_csv(rows);
}

}  // namespace chainsim
