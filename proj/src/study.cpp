#include "ccwsi/study.hpp"

#include "ccwsi/random.hpp"

#include <fmt/format.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace ccwsi::study {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kLabelStreamSalt = 0x626c696e642d6c62ULL;

std::vector<std::size_t> shuffled(std::size_t n, SplitMix64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i-- > 1;) {
        const auto j = std::size_t(rng.below(i + 1));
        std::swap(order[i], order[j]);
    }
    return order;
}

Method other(Method m) { return m == Method::Traditional ? Method::Synthetic : Method::Traditional; }

RatingSummary summarize(const std::array<std::size_t, 4>& counts) {
    RatingSummary s;
    s.counts = counts;
    std::uint64_t sum = 0;
    for (int k = 0; k < 4; ++k) {
        s.n += counts[k];
        sum += std::uint64_t(k + 1) * counts[k];
    }
    for (int k = 0; k < 4; ++k)
        s.percent[k] = percent_half_up(counts[k], s.n);
    if (s.n == 0) {
        s.mean_display = s.sd_display = "n/a";
        return s;
    }
    s.mean = double(sum) / double(s.n);
    s.mean_display = one_decimal_half_up(sum, s.n);
    if (s.n >= 2) {
        double ss = 0.0;
        for (int k = 0; k < 4; ++k)
            ss += double(counts[k]) * ((k + 1) - s.mean) * ((k + 1) - s.mean);
        s.sd = std::sqrt(ss / double(s.n - 1));
        s.sd_display = fmt::format("{:.1f}", std::floor(s.sd * 10.0 + 0.5) / 10.0);
    } else {
        s.sd_display = "n/a";
    }
    return s;
}

nlohmann::json summary_json(const RatingSummary& s) {
    return {{"counts", s.counts}, {"percent", s.percent},           {"n", s.n},
            {"mean", s.mean},     {"sd", s.sd},                     {"mean_display", s.mean_display},
            {"sd_display", s.sd_display}, {"display", s.mean_display + " (" + s.sd_display + ")"}};
}

nlohmann::json count_json(const CountPercent& c) { return {{"n", c.n}, {"percent", c.percent}}; }

std::string cell(const CountPercent& c) { return fmt::format("{} ({}%)", c.n, c.percent); }

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

} // namespace

std::string_view to_string(Method m) { return m == Method::Traditional ? "traditional" : "synthetic"; }

std::string_view to_string(Identification id) {
    switch (id) {
    case Identification::Synthetic: return "synthetic";
    case Identification::Traditional: return "traditional";
    case Identification::CannotTell: return "cannot_tell";
    }
    return "cannot_tell";
}

Identification parse_identification(std::string_view text) {
    if (text == "synthetic")
        return Identification::Synthetic;
    if (text == "traditional")
        return Identification::Traditional;
    if (text == "cannot_tell")
        return Identification::CannotTell;
    throw StudyError(StudyError::Kind::Invalid, "identification must be synthetic, traditional or cannot_tell");
}

std::string_view StudyError::code() const noexcept {
    switch (kind_) {
    case Kind::Invalid: return "invalid_request";
    case Kind::NotFound: return "not_found";
    case Kind::Duplicate: return "duplicate_response";
    case Kind::Orphan: return "orphan_response";
    }
    return "error";
}

// ---- definition ------------------------------------------------------------------

StudyDefinition StudyDefinition::from_json(const nlohmann::json& j, const fs::path& base_dir, bool check_paths) {
    StudyDefinition def;
    try {
        def.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& r : j.at("reviewers"))
            def.reviewers.push_back(r.get<std::string>());
        for (const auto& c : j.at("cases"))
            def.cases.push_back({c.at("case_id").get<std::string>(),
                                 resolve(base_dir, c.at("he_image").get<std::string>()),
                                 resolve(base_dir, c.at("traditional_sox10").get<std::string>()),
                                 resolve(base_dir, c.at("synthetic_sox10").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
        throw StudyError(StudyError::Kind::Invalid, std::string("malformed study definition: ") + e.what());
    }
    def.validate(check_paths);
    return def;
}

StudyDefinition StudyDefinition::load(const fs::path& path, bool check_paths) {
    std::ifstream in(path);
    if (!in)
        throw RuntimeFailure("cannot read study definition " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw StudyError(StudyError::Kind::Invalid, std::string("malformed study definition: ") + e.what());
    }
    return from_json(j, path.parent_path(), check_paths);
}

nlohmann::json StudyDefinition::to_json() const {
    auto cases_json = nlohmann::json::array();
    for (const auto& c : cases)
        cases_json.push_back({{"case_id", c.case_id},
                              {"he_image", c.he_image.string()},
                              {"traditional_sox10", c.traditional_sox10.string()},
                              {"synthetic_sox10", c.synthetic_sox10.string()}});
    return {{"seed", seed}, {"reviewers", reviewers}, {"cases", cases_json}};
}

void StudyDefinition::validate(bool check_paths) const {
    if (cases.empty())
        throw StudyError(StudyError::Kind::Invalid, "study needs at least one case");
    std::set<std::string> ids;
    for (const auto& c : cases) {
        if (c.case_id.empty())
            throw StudyError(StudyError::Kind::Invalid, "case_id must not be empty");
        if (!ids.insert(c.case_id).second)
            throw StudyError(StudyError::Kind::Invalid, "duplicate case_id " + c.case_id);
        if (check_paths)
            for (const auto* p : {&c.he_image, &c.traditional_sox10, &c.synthetic_sox10})
                if (!fs::is_regular_file(*p))
                    throw StudyError(StudyError::Kind::Invalid,
                                     "case " + c.case_id + ": missing image " + p->string());
    }
    std::set<std::string> names;
    for (const auto& r : reviewers)
        if (r.empty() || !names.insert(r).second)
            throw StudyError(StudyError::Kind::Invalid, "reviewer ids must be unique and non-empty");
}

// ---- schedule --------------------------------------------------------------------

std::vector<ReviewItem> generate_schedule(const StudyDefinition& def) {
    if (def.cases.empty())
        throw StudyError(StudyError::Kind::Invalid, "study needs at least one case");
    const std::size_t n = def.cases.size();
    SplitMix64 rng(def.seed);

    const auto block1 = shuffled(n, rng);
    std::vector<Method> first_method(n);
    for (std::size_t k = 0; k < n; ++k)
        first_method[block1[k]] = (rng.next() >> 63) != 0 ? Method::Synthetic : Method::Traditional;
    const auto block2 = shuffled(n, rng);

    std::vector<ReviewItem> items;
    items.reserve(2 * n);
    for (std::size_t k = 0; k < n; ++k)
        items.push_back({int(k), 1, def.cases[block1[k]].case_id, first_method[block1[k]], {}});
    for (std::size_t k = 0; k < n; ++k)
        items.push_back({int(n + k), 2, def.cases[block2[k]].case_id, other(first_method[block2[k]]), {}});

    SplitMix64 labels(def.seed ^ kLabelStreamSalt);
    std::set<std::string> used;
    for (auto& item : items) {
        do {
            item.blinded_label = fmt::format("{:016x}", labels.next());
        } while (!used.insert(item.blinded_label).second);
    }
    return items;
}

nlohmann::json schedule_to_json(const std::vector<ReviewItem>& schedule) {
    auto arr = nlohmann::json::array();
    for (const auto& item : schedule)
        arr.push_back({{"position", item.position},
                       {"block", item.block},
                       {"case_id", item.case_id},
                       {"method", to_string(item.method)},
                       {"label", item.blinded_label}});
    return arr;
}

nlohmann::json blinded_item_json(const ReviewItem& item, std::size_t total) {
    return {{"label", item.blinded_label},
            {"position", item.position},
            {"total", total},
            {"progress", total == 0 ? 0.0 : double(item.position) / double(total)},
            {"he_url", "/api/items/" + item.blinded_label + "/he"},
            {"sox10_url", "/api/items/" + item.blinded_label + "/sox10"}};
}

// ---- responses -------------------------------------------------------------------

nlohmann::json response_to_json(const ReviewResponse& r) {
    return {{"reviewer_id", r.reviewer_id},
            {"position", r.position},
            {"effectiveness", r.effectiveness},
            {"quality", r.quality},
            {"identification", to_string(r.identification)},
            {"timestamp", r.timestamp}};
}

ReviewResponse response_from_json(const nlohmann::json& j, std::int64_t default_timestamp) {
    if (!j.is_object())
        throw StudyError(StudyError::Kind::Invalid, "response must be a JSON object");
    ReviewResponse r;
    try {
        r.reviewer_id = j.at("reviewer_id").get<std::string>();
        r.position = j.at("position").get<int>();
        r.effectiveness = j.at("effectiveness").get<int>();
        r.quality = j.at("quality").get<int>();
        r.identification = parse_identification(j.at("identification").get<std::string>());
        r.timestamp = j.contains("timestamp") ? j.at("timestamp").get<std::int64_t>() : default_timestamp;
    } catch (const nlohmann::json::exception& e) {
        throw StudyError(StudyError::Kind::Invalid, std::string("malformed response: ") + e.what());
    }
    if (r.effectiveness < 1 || r.effectiveness > 4 || r.quality < 1 || r.quality > 4)
        throw StudyError(StudyError::Kind::Invalid, "ratings must be integers 1..4");
    return r;
}

ResponseLog::ResponseLog(fs::path path) : path_(std::move(path)) {}

std::vector<ReviewResponse> ResponseLog::replay() {
    std::vector<ReviewResponse> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in)
        return out;
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::size_t start = 0;
    std::size_t line_no = 0;
    while (start < content.size()) {
        const auto nl = content.find('\n', start);
        if (nl == std::string::npos) {
            // Torn final write: drop it so later appends start on a clean line.
            fs::resize_file(path_, start);
            break;
        }
        ++line_no;
        const std::string_view line(content.data() + start, nl - start);
        if (!line.empty()) {
            try {
                out.push_back(response_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw RuntimeFailure(fmt::format("corrupt response log {} line {}: {}", path_.string(), line_no,
                                                 e.what()));
            }
        }
        start = nl + 1;
    }
    return out;
}

void ResponseLog::append(const ReviewResponse& r) {
    const std::string line = response_to_json(r).dump() + "\n";
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0)
        throw RuntimeFailure("cannot open response log: " + std::string(std::strerror(errno)));
    std::size_t written = 0;
    while (written < line.size()) {
        const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            const int err = errno;
            ::close(fd);
            throw RuntimeFailure("cannot append to response log: " + std::string(std::strerror(err)));
        }
        written += std::size_t(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0)
        throw RuntimeFailure("fsync of response log failed");
}

// ---- statistics ------------------------------------------------------------------

int percent_half_up(std::size_t count, std::size_t total) {
    if (total == 0)
        return 0;
    return int((200 * std::uint64_t(count) + total) / (2 * std::uint64_t(total)));
}

std::string one_decimal_half_up(std::uint64_t numerator, std::uint64_t denominator) {
    const std::uint64_t tenths = (20 * numerator + denominator) / (2 * denominator);
    return fmt::format("{}.{}", tenths / 10, tenths % 10);
}

StudyStats compute_stats(const std::vector<ReviewResponse>& responses, const std::vector<ReviewItem>& schedule) {
    std::array<std::size_t, 4> eff[2]{}, qual[2]{};
    std::size_t ident[2][3]{};
    for (const auto& r : responses) {
        if (r.position < 0 || std::size_t(r.position) >= schedule.size())
            throw StudyError(StudyError::Kind::Orphan,
                             fmt::format("response from {} refers to unscheduled position {}", r.reviewer_id,
                                         r.position));
        if (r.effectiveness < 1 || r.effectiveness > 4 || r.quality < 1 || r.quality > 4)
            throw StudyError(StudyError::Kind::Invalid, "ratings must be integers 1..4");
        const int m = schedule[r.position].method == Method::Synthetic ? 1 : 0;
        ++eff[m][r.effectiveness - 1];
        ++qual[m][r.quality - 1];
        ++ident[m][static_cast<int>(r.identification)];
    }

    StudyStats s;
    s.total_reviews = responses.size();
    s.traditional = {summarize(eff[0]), summarize(qual[0])};
    s.synthetic = {summarize(eff[1]), summarize(qual[1])};

    constexpr int kSaidSynthetic = static_cast<int>(Identification::Synthetic);
    constexpr int kSaidTraditional = static_cast<int>(Identification::Traditional);
    constexpr int kCannotTell = static_cast<int>(Identification::CannotTell);
    auto cp = [&](std::size_t n) { return CountPercent{n, percent_half_up(n, s.total_reviews)}; };
    auto& t = s.identification;
    t.traditional_when_synthetic = cp(ident[1][kSaidTraditional]);
    t.synthetic_when_traditional = cp(ident[0][kSaidSynthetic]);
    t.incorrect = cp(ident[1][kSaidTraditional] + ident[0][kSaidSynthetic]);
    t.correct_synthetic = cp(ident[1][kSaidSynthetic]);
    t.correct_traditional = cp(ident[0][kSaidTraditional]);
    t.correct = cp(ident[1][kSaidSynthetic] + ident[0][kSaidTraditional]);
    t.cannot_tell = cp(ident[0][kCannotTell] + ident[1][kCannotTell]);
    return s;
}

nlohmann::json StudyStats::to_json() const {
    const auto& t = identification;
    return {{"total_reviews", total_reviews},
            {"traditional",
             {{"effectiveness", summary_json(traditional.effectiveness)},
              {"quality", summary_json(traditional.quality)}}},
            {"synthetic",
             {{"effectiveness", summary_json(synthetic.effectiveness)}, {"quality", summary_json(synthetic.quality)}}},
            {"identification",
             {{"incorrect", count_json(t.incorrect)},
              {"identified_traditional_when_synthetic", count_json(t.traditional_when_synthetic)},
              {"identified_synthetic_when_traditional", count_json(t.synthetic_when_traditional)},
              {"correct", count_json(t.correct)},
              {"correct_synthetic", count_json(t.correct_synthetic)},
              {"correct_traditional", count_json(t.correct_traditional)},
              {"cannot_tell", count_json(t.cannot_tell)}}}};
}

std::string StudyStats::render() const {
    std::ostringstream os;
    auto rating_rows = [&](const char* title, const RatingSummary& trad, const RatingSummary& synth) {
        os << fmt::format("{:<32}{:>16}{:>16}\n", title, "Traditional", "Synthetic");
        static constexpr const char* labels[4] = {"1 (poor)", "2", "3", "4 (perfect)"};
        for (int k = 0; k < 4; ++k)
            os << fmt::format("  {:<30}{:>16}{:>16}\n", labels[k],
                              fmt::format("{} ({}%)", trad.counts[k], trad.percent[k]),
                              fmt::format("{} ({}%)", synth.counts[k], synth.percent[k]));
        os << fmt::format("  {:<30}{:>16}{:>16}\n", "mean (sd)", trad.mean_display + " (" + trad.sd_display + ")",
                          synth.mean_display + " (" + synth.sd_display + ")");
    };
    os << fmt::format("Reviews: {} (traditional {}, synthetic {})\n\n", total_reviews, traditional.effectiveness.n,
                      synthetic.effectiveness.n);
    rating_rows("Effectiveness of Sox10 staining", traditional.effectiveness, synthetic.effectiveness);
    os << '\n';
    rating_rows("Image quality", traditional.quality, synthetic.quality);
    os << '\n';
    const auto& t = identification;
    os << fmt::format("{:<44}{:>12}\n", "Identification of staining method", "N (%)");
    os << fmt::format("{:<44}{:>12}\n", "Incorrectly identified", cell(t.incorrect));
    os << fmt::format("  {:<42}{:>12}\n", "traditional when synthetic", cell(t.traditional_when_synthetic));
    os << fmt::format("  {:<42}{:>12}\n", "synthetic when traditional", cell(t.synthetic_when_traditional));
    os << fmt::format("{:<44}{:>12}\n", "Correctly identified", cell(t.correct));
    os << fmt::format("  {:<42}{:>12}\n", "synthetic", cell(t.correct_synthetic));
    os << fmt::format("  {:<42}{:>12}\n", "traditional", cell(t.correct_traditional));
    os << fmt::format("{:<44}{:>12}\n", "Cannot tell", cell(t.cannot_tell));
    return os.str();
}

// ---- session ---------------------------------------------------------------------

StudySession::StudySession(StudyDefinition def, fs::path log_path)
    : def_(std::move(def)), schedule_(generate_schedule(def_)), log_(std::move(log_path)) {
    for (std::size_t i = 0; i < schedule_.size(); ++i)
        label_index_.emplace(schedule_[i].blinded_label, i);
    for (std::size_t i = 0; i < def_.cases.size(); ++i)
        case_index_.emplace(def_.cases[i].case_id, i);
    for (const auto& r : def_.reviewers)
        answered_.emplace(r, std::vector<bool>(schedule_.size(), false));

    for (const auto& r : log_.replay()) {
        check_response(r);
        answered_[r.reviewer_id][std::size_t(r.position)] = true;
        responses_.push_back(r);
    }
}

void StudySession::require_reviewer(const std::string& reviewer_id) const {
    if (!answered_.contains(reviewer_id))
        throw StudyError(StudyError::Kind::NotFound, "unknown reviewer " + reviewer_id);
}

void StudySession::check_response(const ReviewResponse& r) const {
    require_reviewer(r.reviewer_id);
    if (r.position < 0 || std::size_t(r.position) >= schedule_.size())
        throw StudyError(StudyError::Kind::NotFound, fmt::format("unknown position {}", r.position));
    if (r.effectiveness < 1 || r.effectiveness > 4 || r.quality < 1 || r.quality > 4)
        throw StudyError(StudyError::Kind::Invalid, "ratings must be integers 1..4");
    if (answered_.at(r.reviewer_id)[std::size_t(r.position)])
        throw StudyError(StudyError::Kind::Duplicate,
                         fmt::format("reviewer {} already answered position {}", r.reviewer_id, r.position));
}

std::optional<ReviewItem> StudySession::next_item(const std::string& reviewer_id) const {
    std::lock_guard lock(mutex_);
    require_reviewer(reviewer_id);
    const auto& done = answered_.at(reviewer_id);
    for (std::size_t i = 0; i < done.size(); ++i)
        if (!done[i])
            return schedule_[i];
    return std::nullopt;
}

void StudySession::record_response(const ReviewResponse& response) {
    std::lock_guard lock(mutex_);
    check_response(response);
    log_.append(response);
    answered_[response.reviewer_id][std::size_t(response.position)] = true;
    responses_.push_back(response);
}

Progress StudySession::progress(const std::string& reviewer_id) const {
    std::lock_guard lock(mutex_);
    require_reviewer(reviewer_id);
    const auto& done = answered_.at(reviewer_id);
    return {std::size_t(std::count(done.begin(), done.end(), true)), done.size()};
}

std::vector<ReviewResponse> StudySession::responses() const {
    std::lock_guard lock(mutex_);
    return responses_;
}

const ReviewItem* StudySession::find_label(const std::string& label) const {
    const auto it = label_index_.find(label);
    return it == label_index_.end() ? nullptr : &schedule_[it->second];
}

const StudyCase& StudySession::case_for(const ReviewItem& item) const { return def_.cases[case_index_.at(item.case_id)]; }

StudyStats StudySession::stats() const { return compute_stats(responses(), schedule_); }

} // namespace ccwsi::study
