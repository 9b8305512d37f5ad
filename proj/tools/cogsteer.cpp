#include <iostream>

#include "CLI11.hpp"

#include "cogsteer/cogsteer.hpp"

namespace {

int exit_code_for(const std::exception & e) {
    if (dynamic_cast<const cogsteer::PrerequisiteError *>(&e)) {
        return 3;
    }
    if (dynamic_cast<const cogsteer::ValidationError *>(&e) || dynamic_cast<const cogsteer::FormatError *>(&e)) {
        return 2;
    }
    return 1;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"cogsteer: probing, steering and monitoring bias directions in decoder models"};
    std::string stage;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<unsigned> threads;

    std::vector<std::string> choices = cogsteer::stage_names();
    choices.push_back("all");
    app.add_option("stage", stage, "stage to run")->required()->check(CLI::IsMember(choices));
    app.add_option("--config,-c", config_path, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override the master seed");
    app.add_option("--out", out, "override the output directory");
    app.add_option("--threads", threads, "override the worker thread count");
    CLI11_PARSE(app, argc, argv);

    try {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(cogsteer::read_text(config_path));
        } catch (const nlohmann::json::exception & e) {
            throw cogsteer::FormatError("config " + config_path + ": " + e.what());
        }
        if (!j.is_object()) {
            throw cogsteer::FormatError("config " + config_path + ": top level must be an object");
        }
        if (seed) {
            j["seed"] = *seed;
        }
        if (out) {
            j["out_dir"] = *out;
        }
        if (threads) {
            j["threads"] = *threads;
        }
        const auto dir = std::filesystem::path(config_path).parent_path().string();
        const auto cfg = cogsteer::parse_run_config(j, dir.empty() ? "." : dir);
        cogsteer::run_stage(stage, cfg);
        std::cout << stage << ": artifacts in " << cfg.out_dir << "\n";
    } catch (const std::exception & e) {
        std::cerr << "cogsteer " << stage << ": " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 0;
}
