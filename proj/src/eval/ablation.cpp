#include "touchgen/eval/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/log.hpp"

namespace touchgen::eval {

namespace {

const std::vector<std::string>& published_axes() {
    static const std::vector<std::string> axes = {"conditions", "mechanism", "layers", "n_gs", "theta_t"};
    return axes;
}

std::string value_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

bool is_ablation_key(const std::string& key) {
    for (const auto& a : published_axes())
        if (a == key) return true;
    if (key.find('.') == std::string::npos) return false;
    // Dotted paths must name an existing leaf of the config.
    nlohmann::json j = to_json(desk_preset());
    const nlohmann::json* node = &j;
    std::stringstream in(key);
    for (std::string part; std::getline(in, part, '.');) {
        if (!node->is_object() || !node->contains(part)) return false;
        node = &(*node)[part];
    }
    return !node->is_object();
}

std::vector<AblationCell> expand_grid(const nlohmann::json& grid) {
    if (!grid.is_object() || grid.empty()) throw ConfigError("ablation grid must be a non-empty object");
    std::vector<AblationCell> cells{{}};
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        if (!is_ablation_key(it.key()))
            throw ConfigError("invalid ablation key '" + it.key() +
                              "' (use conditions, mechanism, layers, n_gs, theta_t or a dotted config path)");
        if (!it.value().is_array() || it.value().empty())
            throw ConfigError("ablation axis '" + it.key() + "' needs a non-empty list of values");
        std::vector<AblationCell> next;
        for (const auto& cell : cells)
            for (const auto& v : it.value()) {
                AblationCell c = cell;
                c.emplace_back(it.key(), v);
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base, const nlohmann::json& grid,
                                      const std::filesystem::path& out_dir, const AblationOptions& options) {
    const auto cells = expand_grid(grid);
    base.validate();
    check_paths(base);
    const data::DatasetReader reader(base.dataset_root);
    double probe_acc = 0.0;
    const GelProbe probe = train_gel_probe(reader, &probe_acc);
    std::filesystem::create_directories(out_dir);

    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        AblationRow row;
        row.cell = cells[i];
        const auto cell_dir = out_dir / ("cell_" + std::to_string(i));
        try {
            ExperimentConfig config = base;
            for (const auto& [key, value] : cells[i]) apply_override(config, key, value);
            std::filesystem::create_directories(cell_dir);
            std::ofstream(cell_dir / "config.json") << to_json(config).dump(2) << '\n';
            ProgressFn progress;
            if (options.progress) progress = [&, i](long step, double loss) { options.progress(i, step, loss); };
            TrainedModel trained = train_diffusion(config, prepare_training_data(config, reader), progress);
            write_loss_csv(trained.result, cell_dir);
            row.final_loss = trained.result.final_loss;
            EvalInputs inputs{trained.model.get(), trained.tokenizer.get(), options.cttp, &probe, probe_acc};
            MetricReport report = evaluate(config, reader, inputs);
            write_report(report, cell_dir);
            row.report = std::move(report);
        } catch (const std::exception& e) {
            row.status = "error";
            row.error = e.what();
            log::warning("ablation cell " + std::to_string(i) + " failed: " + row.error);
        }
        rows.push_back(std::move(row));
        std::ofstream(out_dir / "ablation.csv", std::ios::binary) << ablation_csv(rows);
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::vector<std::string> keys;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.cell)
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    std::ostringstream out;
    for (const auto& k : keys) out << csv_field(k) << ',';
    out << "status,final_loss,ssim,psnr,lpips,cttp,cttp_shuffled,gel_accuracy,config_hash,content_id,error\n";
    for (const auto& r : rows) {
        for (const auto& k : keys) {
            std::string v;
            for (const auto& [ck, cv] : r.cell)
                if (ck == k) v = value_text(cv);
            out << csv_field(v) << ',';
        }
        out << r.status << ',';
        if (r.report) {
            const auto& m = *r.report;
            out << fmt(r.final_loss) << ',' << fmt(m.ssim) << ',' << fmt(m.psnr) << ",n/a,"
                << (m.cttp ? fmt(*m.cttp) : "n/a") << ',' << (m.cttp_shuffled ? fmt(*m.cttp_shuffled) : "n/a") << ','
                << fmt(m.gel_accuracy) << ',' << m.config_hash << ',' << m.content_id << ',';
        } else {
            out << ",,,n/a,,,,,,";
        }
        out << csv_field(r.error) << '\n';
    }
    return out.str();
}

}  // namespace touchgen::eval
