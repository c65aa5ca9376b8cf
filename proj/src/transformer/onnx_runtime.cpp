// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The asr-triage Authors

#include "transformer/onnx_runtime.hpp"

#include <dlfcn.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <mutex>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/tensor_file.hpp"

#ifndef ASR_ONNXRUNTIME_DEFAULT
#define ASR_ONNXRUNTIME_DEFAULT "libonnxruntime.so.1"
#endif

namespace asr::transformer {
namespace {

// The ONNX Runtime C API is a table of function pointers whose order is
// ABI-stable across releases. We declare only the prefix we call; slot
// numbers are positions in that table.
struct OrtStatus;
struct OrtEnv;
struct OrtSession;
struct OrtSessionOptions;
struct OrtValue;
struct OrtMemoryInfo;
struct OrtTensorTypeAndShapeInfo;
struct OrtAllocator;

using Fn = void (*)();
struct OrtApiBase {
    const Fn* (*GetApi)(std::uint32_t version);
    const char* (*GetVersionString)();
};

constexpr std::uint32_t kApiVersion = 8;
enum Slot : std::size_t {
    kGetErrorMessage = 2,
    kCreateEnv = 3,
    kCreateSession = 7,
    kRun = 9,
    kCreateSessionOptions = 10,
    kSetIntraOpNumThreads = 24,
    kSetInterOpNumThreads = 25,
    kCreateTensorWithDataAsOrtValue = 49,
    kGetTensorMutableData = 51,
    kGetDimensionsCount = 61,
    kGetDimensions = 62,
    kGetTensorTypeAndShape = 65,
    kCreateCpuMemoryInfo = 69,
    kReleaseEnv = 92,
    kReleaseStatus = 93,
    kReleaseMemoryInfo = 94,
    kReleaseSession = 95,
    kReleaseValue = 96,
    kReleaseTensorTypeAndShapeInfo = 99,
    kReleaseSessionOptions = 100,
};
constexpr int kLoggingWarning = 2;
constexpr int kArenaAllocator = 1, kMemTypeDefault = 0;
constexpr int kElemInt64 = 7;

class Runtime {
public:
    static Runtime& get() {
        static std::mutex mu;
        static std::unique_ptr<Runtime> instance;
        std::lock_guard lock(mu);
        if (!instance) instance.reset(new Runtime());
        return *instance;
    }

    template <typename Sig>
    Sig fn(Slot s) const {
        return reinterpret_cast<Sig>(api_[s]);
    }

    // Throws on a non-null status, releasing it.
    void check(OrtStatus* st, const char* what) const {
        if (!st) return;
        const std::string msg = fn<const char* (*)(const OrtStatus*)>(kGetErrorMessage)(st);
        fn<void (*)(OrtStatus*)>(kReleaseStatus)(st);
        throw Error(ErrorCode::Internal, std::string("onnxruntime ") + what + ": " + msg);
    }

    OrtEnv* env() const { return env_; }
    OrtMemoryInfo* cpu() const { return cpu_; }
    const std::string& version() const { return version_; }

private:
    Runtime() {
        const std::string path = onnxruntime_library_path();
        handle_ = dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
        if (!handle_)
            throw config_error("ONNX Runtime library not found (" + path + ": " + dlerror() +
                               "). Install it (pip install onnxruntime) and set ASR_ONNXRUNTIME_LIB to the path of "
                               "libonnxruntime.so, or use the native transformer weights instead.");
        auto get_base = reinterpret_cast<const OrtApiBase* (*)()>(dlsym(handle_, "OrtGetApiBase"));
        if (!get_base) throw config_error(path + " does not export OrtGetApiBase; is it an ONNX Runtime build?");
        const OrtApiBase* base = get_base();
        version_ = base->GetVersionString();
        api_ = base->GetApi(kApiVersion);
        if (!api_) throw config_error("ONNX Runtime " + version_ + " does not provide C API version 8");
        check(fn<OrtStatus* (*)(int, const char*, OrtEnv**)>(kCreateEnv)(kLoggingWarning, "asr-triage", &env_),
              "CreateEnv");
        check(fn<OrtStatus* (*)(int, int, OrtMemoryInfo**)>(kCreateCpuMemoryInfo)(kArenaAllocator, kMemTypeDefault,
                                                                                   &cpu_),
              "CreateCpuMemoryInfo");
    }
    // The runtime lives for the whole process; tearing ORT down during static
    // destruction races its own globals, so nothing is released.

    void* handle_ = nullptr;
    const Fn* api_ = nullptr;
    OrtEnv* env_ = nullptr;
    OrtMemoryInfo* cpu_ = nullptr;
    std::string version_;
};

}  // namespace

std::string onnxruntime_library_path() {
    if (const char* env = std::getenv("ASR_ONNXRUNTIME_LIB"); env && *env) return env;
    return ASR_ONNXRUNTIME_DEFAULT;
}

bool onnxruntime_available() {
    try {
        Runtime::get();
        return true;
    } catch (const Error&) {
        return false;
    }
}

struct ExternalScorer::Session {
    OrtSession* session = nullptr;
    ~Session() {
        if (session) Runtime::get().fn<void (*)(OrtSession*)>(kReleaseSession)(session);
    }
};

ExternalScorer::ExternalScorer(ExternalModelHandle handle, std::string model_id)
    : handle_(std::move(handle)), id_(std::move(model_id)) {
    namespace fs = std::filesystem;
    if (!fs::is_regular_file(handle_.graph_path))
        throw config_error("ONNX graph '" + handle_.graph_path + "' does not exist; export one with `asr-triage export-onnx`");
    if (!fs::is_regular_file(handle_.vocab_path))
        throw config_error("vocabulary '" + handle_.vocab_path + "' does not exist; it is written next to the graph by "
                           "`asr-triage export-onnx`");
    if (handle_.window == 0 || handle_.overlap >= handle_.window)
        throw config_error("external model window must be positive and larger than the overlap");
    vocab_ = textprep::SubwordVocabulary::load(handle_.vocab_path);
    if (id_.empty()) id_ = "onnx-" + fnv1a_hex(read_file(handle_.graph_path));

    Runtime& rt = Runtime::get();
    OrtSessionOptions* opts = nullptr;
    rt.check(rt.fn<OrtStatus* (*)(OrtSessionOptions**)>(kCreateSessionOptions)(&opts), "CreateSessionOptions");
    rt.check(rt.fn<OrtStatus* (*)(OrtSessionOptions*, int)>(kSetIntraOpNumThreads)(opts, 1), "SetIntraOpNumThreads");
    rt.check(rt.fn<OrtStatus* (*)(OrtSessionOptions*, int)>(kSetInterOpNumThreads)(opts, 1), "SetInterOpNumThreads");
    session_ = std::make_unique<Session>();
    OrtStatus* st = rt.fn<OrtStatus* (*)(const OrtEnv*, const char*, const OrtSessionOptions*, OrtSession**)>(
        kCreateSession)(rt.env(), handle_.graph_path.c_str(), opts, &session_->session);
    rt.fn<void (*)(OrtSessionOptions*)>(kReleaseSessionOptions)(opts);
    try {
        rt.check(st, "CreateSession");
    } catch (const Error& e) {
        throw config_error(std::string("cannot load ONNX graph '") + handle_.graph_path + "': " + e.what());
    }
}

ExternalScorer::~ExternalScorer() = default;

std::vector<double> ExternalScorer::run(const std::vector<std::vector<textprep::TokenId>>& segments) const {
    if (segments.empty()) return {};
    Runtime& rt = Runtime::get();
    std::size_t len = 0;
    for (const auto& s : segments) len = std::max(len, s.size() + 2);
    const auto batch = segments.size();

    std::vector<std::int64_t> ids(batch * len, textprep::SubwordVocabulary::kPad), mask(batch * len, 0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::int64_t* row = ids.data() + b * len;
        row[0] = textprep::SubwordVocabulary::kCls;
        for (std::size_t t = 0; t < segments[b].size(); ++t) row[t + 1] = segments[b][t];
        row[segments[b].size() + 1] = textprep::SubwordVocabulary::kSep;
        std::fill_n(mask.data() + b * len, segments[b].size() + 2, 1);
    }

    const std::int64_t shape[2] = {static_cast<std::int64_t>(batch), static_cast<std::int64_t>(len)};
    using CreateTensor = OrtStatus* (*)(const OrtMemoryInfo*, void*, std::size_t, const std::int64_t*, std::size_t, int,
                                        OrtValue**);
    using ReleaseValue = void (*)(OrtValue*);
    const auto create = rt.fn<CreateTensor>(kCreateTensorWithDataAsOrtValue);
    const auto release = rt.fn<ReleaseValue>(kReleaseValue);

    OrtValue* inputs[2] = {nullptr, nullptr};
    OrtValue* output = nullptr;
    auto cleanup = [&] {
        for (auto* v : inputs)
            if (v) release(v);
        if (output) release(output);
    };
    try {
        rt.check(create(rt.cpu(), ids.data(), ids.size() * sizeof(std::int64_t), shape, 2, kElemInt64, &inputs[0]),
                 "CreateTensor(input_ids)");
        rt.check(create(rt.cpu(), mask.data(), mask.size() * sizeof(std::int64_t), shape, 2, kElemInt64, &inputs[1]),
                 "CreateTensor(attention_mask)");
        const char* in_names[2] = {handle_.input_ids_name.c_str(), handle_.attention_mask_name.c_str()};
        const char* out_names[1] = {handle_.logits_name.c_str()};
        using RunFn = OrtStatus* (*)(OrtSession*, const void*, const char* const*, const OrtValue* const*, std::size_t,
                                     const char* const*, std::size_t, OrtValue**);
        rt.check(rt.fn<RunFn>(kRun)(session_->session, nullptr, in_names, inputs, 2, out_names, 1, &output), "Run");

        OrtTensorTypeAndShapeInfo* info = nullptr;
        rt.check(rt.fn<OrtStatus* (*)(const OrtValue*, OrtTensorTypeAndShapeInfo**)>(kGetTensorTypeAndShape)(output, &info),
                 "GetTensorTypeAndShape");
        std::size_t ndim = 0;
        std::int64_t dims[2] = {0, 0};
        OrtStatus* st = rt.fn<OrtStatus* (*)(const OrtTensorTypeAndShapeInfo*, std::size_t*)>(kGetDimensionsCount)(info, &ndim);
        if (!st && ndim == 2)
            st = rt.fn<OrtStatus* (*)(const OrtTensorTypeAndShapeInfo*, std::int64_t*, std::size_t)>(kGetDimensions)(
                info, dims, 2);
        rt.fn<void (*)(OrtTensorTypeAndShapeInfo*)>(kReleaseTensorTypeAndShapeInfo)(info);
        rt.check(st, "GetDimensions");
        if (ndim != 2 || dims[0] != shape[0] || dims[1] != 2)
            throw config_error("ONNX graph output '" + handle_.logits_name + "' must have shape [batch, 2]");

        void* data = nullptr;
        rt.check(rt.fn<OrtStatus* (*)(OrtValue*, void**)>(kGetTensorMutableData)(output, &data), "GetTensorMutableData");
        const float* logits = static_cast<const float*>(data);
        std::vector<double> probs(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            const double l0 = logits[2 * b], l1 = logits[2 * b + 1];
            probs[b] = 1.0 / (1.0 + std::exp(l0 - l1));  // softmax(logits)[1]
        }
        cleanup();
        return probs;
    } catch (...) {
        cleanup();
        throw;
    }
}

FragmentScore ExternalScorer::score_fragment(std::string_view text) const {
    const auto ids = textprep::subword_encode(text, vocab_);
    const auto spans = textprep::segment_spans(ids.size(), handle_.window, handle_.overlap);
    std::vector<std::vector<textprep::TokenId>> segs;
    segs.reserve(spans.size());
    for (const auto& s : spans) segs.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(s.start),
                                                  ids.begin() + static_cast<std::ptrdiff_t>(s.start + s.length));
    return max_pool(run(segs), spans);
}

}  // namespace asr::transformer
