#include "esrkit/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "esrkit/tensor.hpp"  // Error

namespace esr {

bool eligible(const SubmissionRecord& rec) {
    return rec.psnr_val >= 28.95 && rec.psnr_test >= 28.65;
}

namespace {

// Ascending competition ranks: ties share the minimum rank, the next rank
// skips by the tie count.
std::vector<int> competition_ranks(const std::vector<double>& values) {
    std::vector<int> ranks(values.size());
    for (size_t i = 0; i < values.size(); ++i) {
        int below = 0;
        for (size_t j = 0; j < values.size(); ++j)
            if (values[j] < values[i]) ++below;
        ranks[i] = below + 1;
    }
    return ranks;
}

std::vector<int> competition_ranks_int(const std::vector<int>& values) {
    std::vector<double> d(values.begin(), values.end());
    return competition_ranks(d);
}

}  // namespace

RankingTable rank_tracks(const std::vector<SubmissionRecord>& records) {
    RankingTable table;
    std::vector<size_t> elig;  // indices into records / table rows
    for (size_t i = 0; i < records.size(); ++i) {
        TeamRanking row;
        row.team = records[i].team;
        row.is_eligible = eligible(records[i]);
        if (row.is_eligible) elig.push_back(i);
        table.teams.push_back(std::move(row));
    }
    if (elig.empty()) throw Error("rank_tracks: no eligible submissions");

    auto column = [&](double SubmissionRecord::* field) {
        std::vector<double> v;
        for (size_t i : elig) v.push_back(records[i].*field);
        return competition_ranks(v);
    };
    const auto r_time = column(&SubmissionRecord::runtime_ms);
    const auto r_params = column(&SubmissionRecord::params_m);
    const auto r_flops = column(&SubmissionRecord::flops_g);
    const auto r_acts = column(&SubmissionRecord::acts_m);
    const auto r_mem = column(&SubmissionRecord::mem_m);

    std::vector<int> s_main, s_sub1, s_sub2;
    for (size_t k = 0; k < elig.size(); ++k) {
        TeamRanking& row = table.teams[elig[k]];
        row.rank_runtime = r_time[k];
        row.rank_params = r_params[k];
        row.rank_flops = r_flops[k];
        row.rank_acts = r_acts[k];
        row.rank_mem = r_mem[k];
        row.main_score = r_time[k];
        row.sub1_score = r_params[k] + r_flops[k];
        row.sub2_score = r_time[k] + r_params[k] + r_flops[k] + r_acts[k] + r_mem[k];
        s_main.push_back(row.main_score);
        s_sub1.push_back(row.sub1_score);
        s_sub2.push_back(row.sub2_score);
    }
    const auto p_main = competition_ranks_int(s_main);
    const auto p_sub1 = competition_ranks_int(s_sub1);
    const auto p_sub2 = competition_ranks_int(s_sub2);
    for (size_t k = 0; k < elig.size(); ++k) {
        table.teams[elig[k]].place_main = p_main[k];
        table.teams[elig[k]].place_sub1 = p_sub1[k];
        table.teams[elig[k]].place_sub2 = p_sub2[k];
    }
    return table;
}

namespace {

constexpr const char* kHeader =
    "team,psnr_val,psnr_test,runtime_ms,params_m,flops_g,acts_m,mem_m";

double parse_cell(const std::string& cell, int line, int col) {
    try {
        size_t used = 0;
        const double v = std::stod(cell, &used);
        if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw Error("CSV line " + std::to_string(line) + ", column " +
                    std::to_string(col) + ": '" + cell + "' is not a number");
    }
}

}  // namespace

std::vector<SubmissionRecord> load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw Error(path + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw Error(path + ": bad header, expected '" + std::string(kHeader) + "'");

    std::vector<SubmissionRecord> records;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8)
            throw Error("CSV line " + std::to_string(lineno) + ": expected 8 cells, got " +
                        std::to_string(cells.size()));
        SubmissionRecord rec;
        rec.team = cells[0];
        rec.psnr_val = parse_cell(cells[1], lineno, 2);
        rec.psnr_test = parse_cell(cells[2], lineno, 3);
        rec.runtime_ms = parse_cell(cells[3], lineno, 4);
        rec.params_m = parse_cell(cells[4], lineno, 5);
        rec.flops_g = parse_cell(cells[5], lineno, 6);
        rec.acts_m = parse_cell(cells[6], lineno, 7);
        rec.mem_m = parse_cell(cells[7], lineno, 8);
        if (rec.runtime_ms <= 0 || rec.params_m <= 0 || rec.flops_g <= 0 ||
            rec.acts_m <= 0 || rec.mem_m <= 0)
            throw Error("CSV line " + std::to_string(lineno) +
                        ": metric values must be positive");
        records.push_back(std::move(rec));
    }
    return records;
}

std::string render_csv(const std::vector<SubmissionRecord>& records) {
    std::ostringstream out;
    out << kHeader << "\n";
    for (const auto& r : records) {
        out << r.team << ',' << std::setprecision(10) << r.psnr_val << ',' << r.psnr_test
            << ',' << r.runtime_ms << ',' << r.params_m << ',' << r.flops_g << ','
            << r.acts_m << ',' << r.mem_m << "\n";
    }
    return out.str();
}

std::string render(const RankingTable& table, const std::string& track) {
    int TeamRanking::* place;
    int TeamRanking::* score;
    std::string title;
    if (track == "main") {
        place = &TeamRanking::place_main;
        score = &TeamRanking::main_score;
        title = "Main track (runtime)";
    } else if (track == "complexity") {
        place = &TeamRanking::place_sub1;
        score = &TeamRanking::sub1_score;
        title = "Sub-track 1 (params + flops)";
    } else if (track == "overall") {
        place = &TeamRanking::place_sub2;
        score = &TeamRanking::sub2_score;
        title = "Sub-track 2 (all five metrics)";
    } else {
        throw Error("unknown track '" + track + "' (main|complexity|overall)");
    }

    std::vector<const TeamRanking*> rows;
    std::vector<const TeamRanking*> excluded;
    for (const auto& t : table.teams)
        (t.is_eligible ? rows : excluded).push_back(&t);
    std::stable_sort(rows.begin(), rows.end(),
                     [&](const TeamRanking* a, const TeamRanking* b) {
                         return a->*place < b->*place;
                     });

    std::ostringstream out;
    out << title << "\n";
    out << std::left << std::setw(6) << "place" << std::setw(22) << "team"
        << std::setw(7) << "score"
        << "ranks (time,params,flops,acts,mem)\n";
    for (const TeamRanking* t : rows) {
        out << std::left << std::setw(6) << t->*place << std::setw(22) << t->team
            << std::setw(7) << t->*score << t->rank_runtime << ',' << t->rank_params
            << ',' << t->rank_flops << ',' << t->rank_acts << ',' << t->rank_mem
            << "\n";
    }
    if (!excluded.empty()) {
        out << "excluded by the PSNR gates:";
        for (const TeamRanking* t : excluded) out << ' ' << t->team;
        out << "\n";
    }
    return out.str();
}

}  // namespace esr
