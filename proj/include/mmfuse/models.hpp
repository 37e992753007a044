#pragma once

#include <filesystem>
#include <optional>

#include "mmfuse/anomaly.hpp"
#include "mmfuse/config.hpp"
#include "mmfuse/fusion.hpp"

namespace mmfuse {

/// Everything the runtime needs beyond the config. Normalizers and the
/// autoencoder are optional: the pipeline fits or trains them online when a
/// model directory does not supply them.
struct ModelBundle {
    BasicFusionModel<double> basic;
    AdvancedFusionModel<double> advanced;
    AudioEnsembleFusion ensemble;
    std::optional<FeatureNormalizer> visual_normalizer;
    std::optional<FeatureNormalizer> audio_normalizer;
    std::optional<DenseAutoencoder> autoencoder;

    /// Seeded, untrained models with shapes taken from the config.
    static ModelBundle init(const Config &config);
};

/// Reads fusion_basic.bin, fusion_advanced.bin, ensemble.bin, optional
/// autoencoder.bin and models.json. Parameter names and shapes must match the
/// configured dimensions.
ModelBundle load_models(const std::filesystem::path &dir, const Config &config);
void save_models(const std::filesystem::path &dir, const ModelBundle &models);

} // namespace mmfuse
