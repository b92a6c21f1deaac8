#pragma once

#include "ccwsi/histogram.hpp"
#include "ccwsi/image.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>

namespace ccwsi {

struct TranslationRequest {
    std::uint32_t tile_id = 0;
    RasterImage tile;
    std::shared_ptr<const ChromaHistogram> condition; // may be null for translators that ignore it
    std::uint64_t noise_seed = 0;
};

struct TranslationResult {
    std::uint32_t tile_id = 0;
    RasterImage tile;
};

class Translator {
public:
    virtual ~Translator() = default;

    virtual TranslationResult translate(const TranslationRequest& request) = 0;

    /// True when translate() may be called concurrently from several threads.
    [[nodiscard]] virtual bool thread_safe() const noexcept { return true; }

    /// Translates a batch, invoking on_result once per request in completion
    /// order (not necessarily request order). The default runs sequentially.
    virtual void translate_batch(std::span<const TranslationRequest> requests,
                                 const std::function<void(TranslationResult)>& on_result);
};

class IdentityTranslator final : public Translator {
public:
    TranslationResult translate(const TranslationRequest& request) override;
};

struct ChromaMatchOptions {
    TissueCriterion tissue;
    Anchor anchor = Anchor::R;
    double min_source_sd = 1e-6;
};

/// Deterministic histogram-conditioned recoloring. Tissue pixels have their
/// anchored log-chroma standardized against the tile's own statistics and
/// mapped onto the condition's, then are rebuilt at their original RGB
/// norm. Background pixels pass through.
class ChromaMatchTranslator final : public Translator {
public:
    explicit ChromaMatchTranslator(ChromaMatchOptions options = {}) : options_(options) {}
    TranslationResult translate(const TranslationRequest& request) override;

private:
    ChromaMatchOptions options_;
};

/// Intensity-weighted chroma moments of the tissue pixels of an image,
/// in the same units as chroma_stats(). Mass is the total weight.
PlaneStats tissue_chroma_stats(const RasterImage& img, const TissueMask& mask, Anchor anchor, double epsilon);

struct ExternalTranslatorOptions {
    /// Run through /bin/sh -c.
    std::string command;
    /// Longest wait for the next frame while replies are outstanding.
    std::chrono::milliseconds timeout{60000};
    /// Requests written ahead of their replies.
    std::size_t max_in_flight = 8;
};

/// Client for a translator subprocess speaking the wire protocol. Spawns and
/// handshakes in the constructor. Any protocol error leaves the client
/// unusable; later calls rethrow a ProtocolError.
class ExternalTranslator final : public Translator {
public:
    explicit ExternalTranslator(ExternalTranslatorOptions options);
    ~ExternalTranslator() override;
    ExternalTranslator(const ExternalTranslator&) = delete;
    ExternalTranslator& operator=(const ExternalTranslator&) = delete;

    TranslationResult translate(const TranslationRequest& request) override;
    [[nodiscard]] bool thread_safe() const noexcept override { return false; }
    void translate_batch(std::span<const TranslationRequest> requests,
                         const std::function<void(TranslationResult)>& on_result) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace ccwsi
