#include "mmfuse/models.hpp"

#include <fstream>

#include "mmfuse/error.hpp"

namespace mmfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Loaded parameters must line up with a freshly initialised set.
template <typename Scalar>
ad::ParameterSet<Scalar> checked(ad::ParameterSet<Scalar> loaded, const ad::ParameterSet<Scalar> &reference, const fs::path &file) {
    std::vector<std::string> problems;
    if (loaded.size() != reference.size())
        problems.push_back(file.string() + ": " + std::to_string(loaded.size()) + " tensors, expected " + std::to_string(reference.size()));
    for (std::size_t i = 0; i < std::min(loaded.size(), reference.size()); ++i) {
        if (loaded.name(i) != reference.name(i)) {
            problems.push_back(file.string() + ": tensor " + std::to_string(i) + " is '" + loaded.name(i) + "', expected '" +
                               reference.name(i) + "'");
            continue;
        }
        const auto &a = loaded.at(i), &b = reference.at(i);
        if (a.rows() != b.rows() || a.cols() != b.cols())
            problems.push_back(file.string() + ": " + loaded.name(i) + " has shape " + ad::shape_str(a.rows(), a.cols()) + ", expected " +
                               ad::shape_str(b.rows(), b.cols()));
    }
    if (!problems.empty()) throw InvalidConfig(problems);
    return loaded;
}

FusionDims with_features(FusionDims d, int visual, int audio, int events) {
    d.visual_features = visual;
    d.audio_features = audio;
    d.event_classes = events;
    return d;
}

} // namespace

ModelBundle ModelBundle::init(const Config &config) {
    ModelBundle m;
    m.basic = BasicFusionModel<double>::init(with_features(config.basic, kBasicVisualFeatures, kBasicAudioFeatures, 0), config.model_seed);
    m.advanced = AdvancedFusionModel<double>::init(
        with_features(config.advanced, kAdvancedVisualFeatures, kAdvancedAudioFeatures, kEventClasses), config.model_seed + 1);
    m.ensemble = AudioEnsembleFusion::init(config.model_seed + 2, kEnsembleEmbedDim, config.advanced.hidden);
    return m;
}

ModelBundle load_models(const fs::path &dir, const Config &config) {
    ModelBundle m = ModelBundle::init(config);
    const fs::path meta_path = dir / "models.json";
    std::ifstream in(meta_path);
    if (!in) throw IoError("missing model metadata: " + meta_path.string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception &e) {
        throw InvalidConfig(meta_path.string() + ": " + e.what());
    }

    m.basic = {m.basic.dims(), checked(ad::load_parameters<double>(dir / "fusion_basic.bin"), m.basic.params(), dir / "fusion_basic.bin")};
    m.advanced = {m.advanced.dims(),
                  checked(ad::load_parameters<double>(dir / "fusion_advanced.bin"), m.advanced.params(), dir / "fusion_advanced.bin")};

    ad::ParameterSet<double> ens_ref;
    ens_ref.add("weight", Mat<double>(m.ensemble.weight));
    ens_ref.add("bias", Mat<double>(m.ensemble.bias));
    const auto ens = checked(ad::load_parameters<double>(dir / "ensemble.bin"), ens_ref, dir / "ensemble.bin");
    m.ensemble.weight = ens["weight"];
    m.ensemble.bias = ens["bias"];

    if (meta.contains("visual_normalizer")) m.visual_normalizer = FeatureNormalizer::from_json(meta.at("visual_normalizer"));
    if (meta.contains("audio_normalizer")) m.audio_normalizer = FeatureNormalizer::from_json(meta.at("audio_normalizer"));
    if (m.visual_normalizer && m.visual_normalizer->mean.size() != kAdvancedVisualFeatures)
        throw InvalidConfig("models.json: visual normalizer must have " + std::to_string(kAdvancedVisualFeatures) + " features");
    if (m.audio_normalizer && m.audio_normalizer->mean.size() != kAdvancedAudioFeatures)
        throw InvalidConfig("models.json: audio normalizer must have " + std::to_string(kAdvancedAudioFeatures) + " features");

    if (fs::exists(dir / "autoencoder.bin")) {
        DenseAutoencoder ae = DenseAutoencoder::init(0);
        ae.params = checked(ad::load_parameters<double>(dir / "autoencoder.bin"), ae.params, dir / "autoencoder.bin");
        ae.train_mse = meta.value("autoencoder_train_mse", 0.0);
        m.autoencoder = std::move(ae);
    }
    return m;
}

void save_models(const fs::path &dir, const ModelBundle &m) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    ad::save_parameters(dir / "fusion_basic.bin", m.basic.params());
    ad::save_parameters(dir / "fusion_advanced.bin", m.advanced.params());
    ad::ParameterSet<double> ens;
    ens.add("weight", Mat<double>(m.ensemble.weight));
    ens.add("bias", Mat<double>(m.ensemble.bias));
    ad::save_parameters(dir / "ensemble.bin", ens);

    json meta = json::object();
    if (m.visual_normalizer) meta["visual_normalizer"] = m.visual_normalizer->to_json();
    if (m.audio_normalizer) meta["audio_normalizer"] = m.audio_normalizer->to_json();
    if (m.autoencoder) {
        ad::save_parameters(dir / "autoencoder.bin", m.autoencoder->params);
        meta["autoencoder_train_mse"] = m.autoencoder->train_mse;
    }
    std::ofstream out(dir / "models.json");
    if (!out) throw IoError("cannot write " + (dir / "models.json").string());
    out << meta.dump(2) << '\n';
}

} // namespace mmfuse
