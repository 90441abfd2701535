#pragma once

#include <string>
#include <vector>

namespace esr {

// One challenge submission, full-precision metric values.
struct SubmissionRecord {
    std::string team;
    double psnr_val = 0.0;
    double psnr_test = 0.0;
    double runtime_ms = 0.0;
    double params_m = 0.0;
    double flops_g = 0.0;
    double acts_m = 0.0;
    double mem_m = 0.0;
};

// PSNR gates: >= 28.95 dB on validation and >= 28.65 dB on test.
bool eligible(const SubmissionRecord& rec);

struct TeamRanking {
    std::string team;
    bool is_eligible = false;
    // per-metric competition ranks among eligible teams (0 if ineligible)
    int rank_runtime = 0;
    int rank_params = 0;
    int rank_flops = 0;
    int rank_acts = 0;
    int rank_mem = 0;
    // track ranking statistics
    int main_score = 0;  // runtime rank
    int sub1_score = 0;  // params + flops ranks
    int sub2_score = 0;  // all five ranks
    // per-track placement (competition rank of the scores)
    int place_main = 0;
    int place_sub1 = 0;
    int place_sub2 = 0;
};

// Rows in submission input order; ineligible teams carry zero ranks.
struct RankingTable {
    std::vector<TeamRanking> teams;
};

RankingTable rank_tracks(const std::vector<SubmissionRecord>& records);

// Strict CSV with header
// team,psnr_val,psnr_test,runtime_ms,params_m,flops_g,acts_m,mem_m
std::vector<SubmissionRecord> load_csv(const std::string& path);
std::string render_csv(const std::vector<SubmissionRecord>& records);

// track is one of main | complexity (sub-track 1) | overall (sub-track 2)
std::string render(const RankingTable& table, const std::string& track = "main");

}  // namespace esr
