#include <algorithm>
#include <chrono>
#include <map>

#include "dashcoach/digest.hpp"
#include "dashcoach/gateway.hpp"

namespace dashcoach::gateway {

using parser::ParsedAnswer;

std::size_t DialogueTranscript::failure_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(entries, [](const auto& e) { return e.error.has_value(); }));
}

MediaBundle make_media(const media::MergedFrameSet& frames, const std::optional<std::filesystem::path>& audio) {
  MediaBundle bundle;
  for (const auto& frame : frames.frames) bundle.media.frames.push_back(base64_encode(media::encode_png(frame)));
  if (audio) bundle.audio = audio->string();
  bundle.expected_frames = static_cast<int>(frames.frames.size());
  return bundle;
}

DialogueTranscript run_dialogue(const ModelBackend& backend, const catalog::Catalog& catalog,
                                const parser::NormalizationRuleSet& rules, const MediaBundle& media,
                                std::span<const catalog::InstructionInstance> instances,
                                const DialogueOptions& options) {
  DialogueTranscript transcript;
  if (!instances.empty()) transcript.clip_id = instances.front().clip_id;

  std::vector<ChatTurn> history;
  // expansion position -> (transcript position, parsed answer)
  std::map<int, std::pair<int, ParsedAnswer>> answered;

  for (const auto& instance : instances) {
    std::optional<int> parent_entry;
    if (instance.parent_turn) {
      auto it = answered.find(*instance.parent_turn);
      if (it != answered.end()) parent_entry = it->second.first;
      const bool parent_affirmative = it != answered.end() && it->second.second.is(ParsedAnswer::Variant::affirmative);
      if (instance.conditional && !parent_affirmative) continue;
    }

    const auto& instruction = catalog.at(instance.template_id);
    InferenceRequest request;
    request.media = media.media;
    request.audio = media.audio;
    request.params = options.params;
    if (options.include_history) request.turns = history;
    request.turns.push_back({ChatTurn::Role::user, instruction.text});

    TranscriptEntry entry;
    entry.instance = instance;
    entry.instance.turn_index = static_cast<int>(transcript.entries.size());
    entry.instance.parent_turn = parent_entry;

    const auto start = std::chrono::steady_clock::now();
    try {
      request.validate(media.expected_frames);
      entry.raw_response = backend.infer(request);
      entry.parsed = parser::parse_response(entry.raw_response, instruction, rules);
      history.push_back({ChatTurn::Role::user, instruction.text});
      history.push_back({ChatTurn::Role::assistant, entry.raw_response});
    } catch (const GatewayError& e) {
      entry.parsed = ParsedAnswer::unparseable(std::string(to_string(e.kind())));
      entry.error = e.what();
    }
    entry.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    answered.emplace(instance.turn_index, std::make_pair(entry.instance.turn_index, entry.parsed));
    transcript.entries.push_back(std::move(entry));
  }
  return transcript;
}

}  // namespace dashcoach::gateway
