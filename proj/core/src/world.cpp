#include "duet/world.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "duet/reward.hpp"

#include <nlohmann/json.hpp>

namespace duet {

using ordered_json = nlohmann::ordered_json;

const char* to_string(QuestionKind kind) {
  return kind == QuestionKind::procedural ? "procedural" : "predictive";
}

QuestionKind question_kind_from_string(const std::string& s) {
  if (s == "procedural") return QuestionKind::procedural;
  if (s == "predictive") return QuestionKind::predictive;
  throw std::invalid_argument("unknown question kind: " + s);
}

namespace {

// A permutation with no fixed point: conjugate of a +1 rotation.
std::vector<int> derangement(int n, Rng& rng) {
  std::vector<int> pi(n);
  std::iota(pi.begin(), pi.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(pi[i], pi[rng.next_int(i + 1)]);
  std::vector<int> inv(n);
  for (int i = 0; i < n; ++i) inv[pi[i]] = i;
  std::vector<int> out(n);
  for (int i = 0; i < n; ++i) out[i] = pi[(inv[i] + 1) % n];
  return out;
}

std::uint64_t rule_key(QuestionKind kind, int action_idx, int object_idx, int hyp_idx) {
  return (static_cast<std::uint64_t>(kind == QuestionKind::predictive) << 48) |
         (static_cast<std::uint64_t>(hyp_idx) << 32) |
         (static_cast<std::uint64_t>(action_idx) << 16) |
         static_cast<std::uint64_t>(object_idx);
}

std::string frame_signature(const Vocab& vocab, const Frame& f, QuestionKind kind, int hyp) {
  std::ostringstream os;
  os << "(" << to_string(kind);
  for (int s : f.slots) os << ", " << vocab.describe_symbol(s);
  if (kind == QuestionKind::predictive) os << ", if " << vocab.describe_symbol(hyp);
  os << ")";
  return os.str();
}

Frame modal_frame(const SymbolicVideo& clip) {
  Frame out{};
  for (int slot = 0; slot < Vocab::kArity; ++slot) {
    std::map<int, int> counts;
    for (const Frame& f : clip.frames) counts[f.slots[slot]]++;
    int best = clip.frames.front().slots[slot];
    int best_count = 0;
    for (const auto& [sym, count] : counts) {
      if (count > best_count) {
        best = sym;
        best_count = count;
      }
    }
    out.slots[slot] = best;
  }
  return out;
}

// The answer names exactly the next event's content, nothing from the input.
std::vector<int> event_answer_tokens(const Vocab& vocab, const Frame& last,
                                     const Frame& event) {
  return {vocab.word(last.actor()), vocab.word(event.action()), vocab.word(event.object()),
          vocab.word(event.location())};
}

Caption template_caption(const Vocab& vocab, const std::vector<int>& think,
                         const std::vector<int>& answer) {
  std::vector<int> tokens;
  tokens.reserve(think.size() + answer.size() + 5);
  tokens.push_back(Vocab::kThinkOpen);
  tokens.insert(tokens.end(), think.begin(), think.end());
  tokens.push_back(Vocab::kThinkClose);
  tokens.push_back(Vocab::kAnswerOpen);
  tokens.insert(tokens.end(), answer.begin(), answer.end());
  tokens.push_back(Vocab::kAnswerClose);
  tokens.push_back(Vocab::kEnd);
  return Caption::from_tokens(std::move(tokens), vocab);
}

}  // namespace

RuleTable RuleTable::make(const Vocab& vocab, std::uint64_t seed) {
  vocab.validate();
  RuleTable rt(vocab);
  Rng rng(seed);
  const int r = vocab.role_size();

  // Procedural: the next action follows from the current one; predictive:
  // it follows from the hypothesis posed in the question. Object and
  // location transitions are kind-independent.
  const std::vector<int> sigma = derangement(r, rng);  // proc action -> action
  const std::vector<int> rho = derangement(r, rng);    // pred hypothesis -> action
  const std::vector<int> tau = derangement(r, rng);    // object -> object
  const int loc_delta = 1 + rng.next_int(r - 1);

  const int action0 = vocab.role_begin(Role::action);
  const int object0 = vocab.role_begin(Role::object);
  for (int a = 0; a < r; ++a) {
    for (int o = 0; o < r; ++o) {
      Event proc;
      proc.action = action0 + sigma[a];
      proc.object = object0 + tau[o];
      proc.location_delta = loc_delta;
      rt.table_[rule_key(QuestionKind::procedural, a, o, 0)] = proc;
      for (int h = 0; h < r; ++h) {
        Event pred;
        pred.action = action0 + rho[h];
        pred.object = object0 + tau[o];
        pred.location_delta = loc_delta;
        rt.table_[rule_key(QuestionKind::predictive, a, o, h)] = pred;
      }
    }
  }
  return rt;
}

RuleTable::Event RuleTable::lookup(const Frame& last, QuestionKind kind,
                                   int hypothesis_action) const {
  const int r = vocab_.role_size();
  const auto role_index = [&](int symbol, Role role) -> int {
    if (!vocab_.symbol_valid(symbol) || vocab_.role_of(symbol) != role) return -1;
    return symbol - vocab_.role_begin(role);
  };
  const int a = role_index(last.action(), Role::action);
  const int o = role_index(last.object(), Role::object);
  int h = 0;
  if (kind == QuestionKind::predictive) {
    h = role_index(hypothesis_action, Role::action);
  }
  if (a < 0 || o < 0 || h < 0) {
    throw std::invalid_argument("RuleTable: no rule for signature " +
                                frame_signature(vocab_, last, kind, hypothesis_action));
  }
  const auto it = table_.find(rule_key(kind, a, o, h));
  if (it == table_.end()) {
    throw std::invalid_argument("RuleTable: no rule for signature " +
                                frame_signature(vocab_, last, kind, hypothesis_action));
  }
  (void)r;
  return it->second;
}

Frame RuleTable::apply(const Frame& last, const Event& e) const {
  const int r = vocab_.role_size();
  const int loc0 = vocab_.role_begin(Role::location);
  Frame f;
  f.slots[0] = last.actor();
  f.slots[1] = e.object;
  f.slots[2] = e.action;
  f.slots[3] = loc0 + ((last.location() - loc0 + e.location_delta) % r);
  return f;
}

Caption RuleBasedAnnotator::annotate(const SymbolicVideo& clip) const {
  if (clip.empty()) throw std::invalid_argument("annotate: empty clip");
  const Frame f = modal_frame(clip);
  const std::vector<int> answer = {vocab_.word(f.actor()), vocab_.word(f.action()),
                                   vocab_.word(f.object()), vocab_.word(f.location())};
  const std::vector<int> think = {vocab_.word(f.actor()), vocab_.tok_then()};
  return template_caption(vocab_, think, answer);
}

bool leakage_free(const Question& question, const Caption& answer) {
  const auto ans = answer.answer_tokens();
  for (int t : ans) {
    if (std::find(question.tokens.begin(), question.tokens.end(), t) != question.tokens.end()) {
      return false;
    }
  }
  return true;
}

Episode generate_episode(const RuleTable& rules, QuestionKind kind, Rng& rng,
                         const WorldConfig& cfg) {
  const Vocab& vocab = cfg.vocab;
  const int r = vocab.role_size();

  Frame f0;
  f0.slots[0] = vocab.role_begin(Role::actor) + rng.next_int(r);
  f0.slots[1] = vocab.role_begin(Role::object) + rng.next_int(r);
  f0.slots[2] = vocab.role_begin(Role::action) + rng.next_int(r);
  f0.slots[3] = vocab.role_begin(Role::location) + rng.next_int(r);

  // Input history evolves under the procedural dynamics.
  const int input_len =
      cfg.input_min_frames + rng.next_int(cfg.input_max_frames - cfg.input_min_frames + 1);
  SymbolicVideo input;
  input.frames.push_back(f0);
  for (int i = 1; i < input_len; ++i) {
    const Frame& last = input.frames.back();
    input.frames.push_back(rules.apply(last, rules.lookup(last, QuestionKind::procedural)));
  }
  const Frame& last = input.frames.back();

  // What-if hypotheses pose an action other than the one already underway,
  // so the hypothesis word never collides with the answer's context words.
  int hypothesis = -1;
  if (kind == QuestionKind::predictive) {
    const int current = last.action() - vocab.role_begin(Role::action);
    hypothesis = vocab.role_begin(Role::action) + (current + 1 + rng.next_int(r - 1)) % r;
  }
  const RuleTable::Event event = rules.lookup(last, kind, hypothesis);
  const Frame event_frame = rules.apply(last, event);

  const int gt_len = cfg.gt_min_frames + rng.next_int(cfg.gt_max_frames - cfg.gt_min_frames + 1);
  SymbolicVideo gt_video;
  gt_video.frames.assign(gt_len, event_frame);

  const std::vector<int> answer = event_answer_tokens(vocab, last, event_frame);
  std::vector<int> think;
  if (kind == QuestionKind::procedural) {
    think = {vocab.word(last.actor()), vocab.word(last.action()), vocab.word(last.object()),
             vocab.word(last.location()), vocab.tok_then()};
  } else {
    think = {vocab.word(last.actor()), vocab.word(hypothesis), vocab.word(last.object()),
             vocab.word(last.location()), vocab.tok_then()};
  }
  const Caption gt_caption = template_caption(vocab, think, answer);

  // Question context words shrink until the leakage check passes. The default
  // rules have no fixed points, so the first candidate passes; the retry loop
  // guards custom rule tables.
  Question question;
  question.kind = kind;
  for (int attempt = 0; attempt <= cfg.qa_max_retries; ++attempt) {
    std::vector<int> q;
    if (kind == QuestionKind::procedural) {
      q = {vocab.tok_what(), vocab.tok_next(), vocab.tok_after()};
      if (attempt < 1) q.push_back(vocab.word(last.action()));
      if (attempt < 2) q.push_back(vocab.word(last.object()));
      q.push_back(vocab.tok_qmark());
    } else {
      q = {vocab.tok_what(), vocab.tok_if(), vocab.word(hypothesis), vocab.tok_after()};
      if (attempt < 1) q.push_back(vocab.word(last.object()));
      q.push_back(vocab.tok_qmark());
    }
    question.tokens = std::move(q);
    if (leakage_free(question, gt_caption)) break;
    if (attempt == cfg.qa_max_retries) {
      throw std::runtime_error("generate_episode: leakage check failed after retries");
    }
  }

  Episode ep;
  ep.input_video = std::move(input);
  ep.question = std::move(question);
  ep.cot = think;
  ep.gt_caption = gt_caption;
  ep.gt_video = std::move(gt_video);
  return ep;
}

std::vector<SymbolicVideo> shot_split(const SymbolicVideo& long_video,
                                      const std::vector<int>& boundaries) {
  const int n = long_video.length();
  int prev = 0;
  for (int b : boundaries) {
    if (b <= prev || b >= n) {
      throw std::invalid_argument("shot_split: boundaries must be strictly increasing within range");
    }
    prev = b;
  }
  std::vector<SymbolicVideo> segments;
  std::vector<int> cuts = boundaries;
  cuts.push_back(n);
  int begin = 0;
  for (int cut : cuts) {
    if (cut - begin >= 3) {  // segments shorter than 3 frames are dropped
      SymbolicVideo seg;
      seg.frames.assign(long_video.frames.begin() + begin, long_video.frames.begin() + cut);
      segments.push_back(std::move(seg));
    }
    begin = cut;
  }
  return segments;
}

SymbolicVideo clip_select(const std::vector<SymbolicVideo>& segments, const Caption& caption,
                          const Vocab& vocab) {
  if (segments.empty()) throw std::invalid_argument("clip_select: empty segment list");
  int best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const double score = clip_t(caption, segments[i], vocab);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  SymbolicVideo clip = segments[best];
  if (clip.length() > 5) {
    const int start = (clip.length() - 5) / 2;
    clip.frames = {clip.frames.begin() + start, clip.frames.begin() + start + 5};
  }
  return clip;
}

QaSample qa_generate(const std::vector<std::pair<SymbolicVideo, Caption>>& clips, Rng& rng,
                     const Vocab& vocab, int max_retries) {
  if (clips.size() < 2) throw std::invalid_argument("qa_generate: need at least 2 clips");

  const int k = rng.next_int(static_cast<int>(clips.size()) - 1);
  const Caption& context = clips[k].second;
  const Caption& answer = clips[k + 1].second;

  // The naive question carries all of clip k's content words; regeneration
  // drops whichever words the self-check flags.
  std::vector<int> context_words = context.answer_or_content(vocab);
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    Question q;
    q.kind = QuestionKind::procedural;
    q.tokens = {vocab.tok_what(), vocab.tok_next(), vocab.tok_after()};
    q.tokens.insert(q.tokens.end(), context_words.begin(), context_words.end());
    q.tokens.push_back(vocab.tok_qmark());
    if (leakage_free(q, answer)) {
      QaSample s;
      s.question = std::move(q);
      s.cot = context.answer_or_content(vocab);
      s.cot.push_back(vocab.tok_then());
      s.answer_caption = answer;
      s.clip_index = k;
      return s;
    }
    const auto ans = answer.answer_tokens();
    std::erase_if(context_words, [&](int w) {
      return std::find(ans.begin(), ans.end(), w) != ans.end();
    });
  }
  throw std::runtime_error("qa_generate: leakage self-check failed after retries");
}

namespace {

ordered_json video_to_json(const SymbolicVideo& v) {
  ordered_json frames = ordered_json::array();
  for (const Frame& f : v.frames) {
    frames.push_back(std::vector<int>(f.slots.begin(), f.slots.end()));
  }
  return frames;
}

SymbolicVideo video_from_json(const ordered_json& j) {
  SymbolicVideo v;
  for (const auto& fj : j) {
    Frame f;
    if (fj.size() != Vocab::kArity) throw std::invalid_argument("frame arity mismatch");
    for (int i = 0; i < Vocab::kArity; ++i) f.slots[i] = fj[i].get<int>();
    v.frames.push_back(f);
  }
  return v;
}

}  // namespace

void write_dataset(const std::vector<Episode>& episodes, const Vocab& vocab,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_dataset: cannot open " + path.string());

  ordered_json header;
  header["format"] = "duet-dataset";
  header["version"] = 1;
  header["symbols"] = vocab.symbol_count;
  header["arity"] = Vocab::kArity;
  ordered_json table = ordered_json::array();
  for (const auto& [token, symbol] : vocab.token_symbol_table()) {
    table.push_back({token, symbol});
  }
  header["token_symbol_table"] = table;
  out << header.dump() << "\n";

  for (const Episode& ep : episodes) {
    ordered_json j;
    j["id"] = ep.id;
    j["kind"] = to_string(ep.question.kind);
    j["input_video"] = video_to_json(ep.input_video);
    j["question"] = ep.question.tokens;
    j["cot"] = ep.cot;
    j["gt_caption"] = ep.gt_caption.tokens;
    j["gt_video"] = video_to_json(ep.gt_video);
    out << j.dump() << "\n";
  }
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_dataset: cannot open " + path.string());

  std::string line;
  int line_no = 0;
  const auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error("read_dataset: " + path.string() + " line " +
                              std::to_string(line_no) + ": " + what);
  };

  if (!std::getline(in, line)) throw std::runtime_error("read_dataset: missing header line");
  line_no = 1;
  Dataset ds;
  try {
    const ordered_json header = ordered_json::parse(line);
    if (header.at("format") != "duet-dataset") throw fail("not a duet dataset");
    ds.vocab.symbol_count = header.at("symbols").get<int>();
    ds.vocab.validate();
    if (header.at("arity").get<int>() != Vocab::kArity) throw fail("unsupported arity");
  } catch (const ordered_json::exception& e) {
    throw fail(e.what());
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const ordered_json j = ordered_json::parse(line);
      Episode ep;
      ep.id = j.at("id").get<std::int64_t>();
      ep.question.kind = question_kind_from_string(j.at("kind").get<std::string>());
      ep.input_video = video_from_json(j.at("input_video"));
      ep.question.tokens = j.at("question").get<std::vector<int>>();
      ep.cot = j.at("cot").get<std::vector<int>>();
      ep.gt_caption = Caption::from_tokens(j.at("gt_caption").get<std::vector<int>>(), ds.vocab);
      ep.gt_video = video_from_json(j.at("gt_video"));
      ds.episodes.push_back(std::move(ep));
    } catch (const ordered_json::exception& e) {
      throw fail(e.what());
    } catch (const std::invalid_argument& e) {
      throw fail(e.what());
    }
  }
  return ds;
}

std::vector<Episode> generate_dataset(const RuleTable& rules, const CorpusCounts& counts,
                                      std::int64_t id_base, Rng& rng, const WorldConfig& cfg) {
  std::vector<Episode> out;
  out.reserve(counts.procedural + counts.predictive);
  std::int64_t id = id_base;
  for (int i = 0; i < counts.procedural; ++i) {
    Episode ep = generate_episode(rules, QuestionKind::procedural, rng, cfg);
    ep.id = id++;
    out.push_back(std::move(ep));
  }
  for (int i = 0; i < counts.predictive; ++i) {
    Episode ep = generate_episode(rules, QuestionKind::predictive, rng, cfg);
    ep.id = id++;
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace duet
