// esr: command-line front end for the efficient-SR toolkit.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "esrkit/builders.hpp"
#include "esrkit/forward.hpp"
#include "esrkit/image.hpp"
#include "esrkit/losses.hpp"
#include "esrkit/profiler.hpp"
#include "esrkit/ranking.hpp"
#include "esrkit/reparam.hpp"

namespace fs = std::filesystem;

namespace {

double max_abs_diff(const esr::Tensor& a, const esr::Tensor& b) {
    if (!a.same_shape(b))
        throw esr::Error("shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - b.data()[i]));
    return m;
}

std::vector<fs::path> sorted_pngs(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw esr::Error("no .png files in " + dir.string());
    return files;
}

void parse_size(const std::string& s, int& h, int& w) {
    const auto x = s.find('x');
    if (x == std::string::npos)
        throw CLI::ValidationError("--input-size", "expected HxW, got '" + s + "'");
    try {
        size_t used1 = 0, used2 = 0;
        h = std::stoi(s.substr(0, x), &used1);
        w = std::stoi(s.substr(x + 1), &used2);
        if (used1 != x || used2 != s.size() - x - 1 || h < 1 || w < 1)
            throw std::invalid_argument(s);
    } catch (const std::exception&) {
        throw CLI::ValidationError("--input-size", "expected HxW, got '" + s + "'");
    }
}

int cmd_infer(const std::string& arch_path, const std::string& weights_path,
              const std::string& input_path, const std::string& output_path,
              bool collapse) {
    const esr::ArchSpec arch = esr::load_arch(arch_path);
    const esr::WeightStore weights = esr::load_weights(weights_path);
    const esr::Tensor input = esr::to_tensor(esr::load_png(input_path));
    esr::Tensor out = esr::forward(arch, weights, input);
    if (collapse) {
        const auto [carch, cweights] = esr::collapse_arch(arch, weights);
        const esr::Tensor cout_t = esr::forward(carch, cweights, input);
        const double err = max_abs_diff(out, cout_t);
        if (err > 1e-4)
            throw esr::Error("collapse equivalence violated: max-abs " +
                             std::to_string(err));
        std::cout << "collapse max-abs deviation " << err << "\n";
        out = cout_t;
    }
    esr::save_png(esr::to_image(out), output_path);
    std::cout << "wrote " << output_path << " (" << out.w() << "x" << out.h() << ")\n";
    return 0;
}

int cmd_profile(const std::string& arch_path, const std::string& size_str,
                const std::string& weights_path, bool time_it,
                const std::string& images_dir) {
    int h = 256, w = 256;
    if (!size_str.empty()) parse_size(size_str, h, w);
    const esr::ArchSpec arch = esr::load_arch(arch_path);
    esr::MetricsReport report = esr::profile(arch, h, w);
    if (time_it) {
        if (weights_path.empty() || images_dir.empty())
            throw esr::Error("--time needs --weights and --images");
        const esr::WeightStore weights = esr::load_weights(weights_path);
        std::vector<esr::Tensor> inputs;
        for (const auto& p : sorted_pngs(images_dir))
            inputs.push_back(esr::to_tensor(esr::load_png(p.string())));
        report.runtime_ms = esr::time_inference(arch, weights, inputs, 3);
    }
    std::cout << report.text();
    return 0;
}

int cmd_psnr(const std::string& sr_path, const std::string& hr_path, int border) {
    std::vector<std::pair<fs::path, fs::path>> pairs;
    if (fs::is_directory(sr_path) != fs::is_directory(hr_path))
        throw esr::Error("--sr and --hr must both be files or both directories");
    if (fs::is_directory(sr_path)) {
        const auto sr_files = sorted_pngs(sr_path);
        const auto hr_files = sorted_pngs(hr_path);
        if (sr_files.size() != hr_files.size())
            throw esr::Error("directory sizes differ: " +
                             std::to_string(sr_files.size()) + " vs " +
                             std::to_string(hr_files.size()));
        for (size_t i = 0; i < sr_files.size(); ++i)
            pairs.emplace_back(sr_files[i], hr_files[i]);
    } else {
        pairs.emplace_back(sr_path, hr_path);
    }
    double sum = 0.0;
    for (const auto& [sr, hr] : pairs) {
        const double db =
            esr::psnr(esr::load_png(sr.string()), esr::load_png(hr.string()), border);
        std::cout << sr.filename().string() << "  " << db << " dB\n";
        sum += db;
    }
    std::cout << "mean  " << sum / static_cast<double>(pairs.size()) << " dB\n";
    return 0;
}

int cmd_degrade(const std::string& input_path, const std::string& output_path,
                int scale) {
    esr::DegradeConfig cfg;
    cfg.scale = scale;
    const esr::Tensor hr = esr::to_tensor(esr::load_png(input_path));
    const esr::Tensor lr = esr::bicubic_resize(hr, cfg, esr::ResizeDirection::Down);
    esr::save_png(esr::to_image(lr), output_path);
    std::cout << "wrote " << output_path << " (" << lr.w() << "x" << lr.h() << ")\n";
    return 0;
}

int cmd_reparam(const std::string& arch_path, const std::string& weights_path,
                const std::string& out_arch, const std::string& out_weights) {
    const esr::ArchSpec arch = esr::load_arch(arch_path);
    const esr::WeightStore weights = esr::load_weights(weights_path);
    const auto [carch, cweights] = esr::collapse_arch(arch, weights);
    esr::save_arch(carch, out_arch);
    esr::save_weights(cweights, out_weights);
    std::cout << "convs " << esr::count_convs(arch) << " -> " << esr::count_convs(carch)
              << "\n";
    return 0;
}

int cmd_verify(const std::string& arch_path, const std::string& weights_path,
               int trials) {
    const esr::ArchSpec arch = esr::load_arch(arch_path);
    const esr::WeightStore weights = esr::load_weights(weights_path);
    const auto [carch, cweights] = esr::collapse_arch(arch, weights);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        esr::Tensor in(1, arch.in_channels, 16, 16);
        for (auto& v : in.data()) v = uni(rng);
        worst = std::max(worst, max_abs_diff(esr::forward(arch, weights, in),
                                             esr::forward(carch, cweights, in)));
    }
    std::cout << "max equivalence error over " << trials << " trials: " << worst << "\n";
    if (worst > 1e-4) throw esr::Error("equivalence tolerance 1e-4 exceeded");
    std::cout << "pass\n";
    return 0;
}

int cmd_rank(const std::string& csv_path, const std::string& track) {
    const auto records = esr::load_csv(csv_path);
    std::cout << esr::render(esr::rank_tracks(records), track);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Efficient super-resolution toolkit"};
    app.require_subcommand(1);

    std::string arch_path, weights_path, input_path, output_path;
    std::string sr_path, hr_path, images_dir, csv_path;
    std::string size_str, out_arch, out_weights, track = "main";
    bool collapse = false, time_it = false;
    int border = 4, scale = 4, trials = 10;

    auto* infer = app.add_subcommand("infer", "Super-resolve one PNG");
    infer->add_option("--arch", arch_path)->required();
    infer->add_option("--weights", weights_path)->required();
    infer->add_option("--input", input_path)->required();
    infer->add_option("--output", output_path)->required();
    infer->add_flag("--collapse", collapse, "reparameterize first, check equivalence");

    auto* profile = app.add_subcommand("profile", "Report efficiency metrics");
    profile->add_option("--arch", arch_path)->required();
    profile->add_option("--input-size", size_str, "HxW, default 256x256");
    profile->add_option("--weights", weights_path);
    profile->add_flag("--time", time_it, "best-of-3 runtime over --images");
    profile->add_option("--images", images_dir);

    auto* psnr_cmd = app.add_subcommand("psnr", "PSNR of PNG(s) vs ground truth");
    psnr_cmd->add_option("--sr", sr_path)->required();
    psnr_cmd->add_option("--hr", hr_path)->required();
    psnr_cmd->add_option("--border", border);

    auto* degrade = app.add_subcommand("degrade", "Antialiased bicubic downscale");
    degrade->add_option("--input", input_path)->required();
    degrade->add_option("--output", output_path)->required();
    degrade->add_option("--scale", scale);

    auto* reparam = app.add_subcommand("reparam", "Collapse an arch and its weights");
    reparam->add_option("--arch", arch_path)->required();
    reparam->add_option("--weights", weights_path)->required();
    reparam->add_option("--out-arch", out_arch)->required();
    reparam->add_option("--out-weights", out_weights)->required();

    auto* verify = app.add_subcommand("verify", "Check collapse equivalence");
    verify->add_option("--arch", arch_path)->required();
    verify->add_option("--weights", weights_path)->required();
    verify->add_option("--trials", trials);

    auto* rank = app.add_subcommand("rank", "Score a submission CSV");
    rank->add_option("--csv", csv_path)->required();
    rank->add_option("--track", track, "main|complexity|overall");

    try {
        app.parse(argc, argv);
        if (infer->parsed())
            return cmd_infer(arch_path, weights_path, input_path, output_path, collapse);
        if (profile->parsed())
            return cmd_profile(arch_path, size_str, weights_path, time_it, images_dir);
        if (psnr_cmd->parsed()) return cmd_psnr(sr_path, hr_path, border);
        if (degrade->parsed()) return cmd_degrade(input_path, output_path, scale);
        if (reparam->parsed())
            return cmd_reparam(arch_path, weights_path, out_arch, out_weights);
        if (verify->parsed()) return cmd_verify(arch_path, weights_path, trials);
        if (rank->parsed()) return cmd_rank(csv_path, track);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const esr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
