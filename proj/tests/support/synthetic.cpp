#include "synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace ragscope::synthetic {

namespace {

// Portable draws: the std distributions differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11U) * 0x1.0p-53; }
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  bool chance(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

constexpr std::array kWords = {
    "river",   "policy",  "engine",   "orbit",   "harvest", "protein", "market",  "signal",
    "glacier", "treaty",  "voltage",  "species", "ledger",  "canyon",  "vaccine", "tariff",
    "neuron",  "lattice", "monsoon",  "archive", "fossil",  "circuit", "pigment", "reactor",
    "estuary", "dialect", "mortgage", "enzyme",  "comet",   "granite", "census",  "turbine"};

std::string words(Rng &rng, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += kWords[rng.index(kWords.size())];
  }
  return out;
}

double round3(double x) { return std::round(x * 1000.0) / 1000.0; }
double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

std::string two_digit(std::size_t i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

MetricMeta categorical(std::string id, std::string name, AuthorType author,
                       std::vector<std::pair<std::string, double>> values) {
  MetricMeta metric;
  metric.metric_id = std::move(id);
  metric.name = std::move(name);
  metric.author_type = author;
  metric.scale.kind = ScaleKind::categorical;
  for (auto &[value, mapping] : values) metric.scale.values.push_back({value, mapping, {}});
  return metric;
}

MetricMeta numeric(std::string id, std::string name, double lo, double hi,
                   bool higher_is_better = true) {
  MetricMeta metric;
  metric.metric_id = std::move(id);
  metric.name = std::move(name);
  metric.author_type = AuthorType::algorithmic;
  metric.scale.kind = ScaleKind::numeric;
  metric.scale.min = lo;
  metric.scale.max = hi;
  metric.higher_is_better = higher_is_better;
  return metric;
}

// Replaces the label with a different one drawn uniformly.
std::size_t flip(Rng &rng, std::size_t label, std::size_t n_labels) {
  std::size_t other = rng.index(n_labels - 1);
  return other >= label ? other + 1 : label;
}

std::size_t three_way(double q) { return q > 0.62 ? 2 : (q > 0.4 ? 1 : 0); }

Rating rate(std::string label, double duration) {
  return Rating{std::move(label), std::round(duration * 10.0) / 10.0, std::nullopt};
}

Rating score(double value) { return Rating{value, std::nullopt, std::nullopt}; }

}  // namespace

ExperimentFile reference_experiment() {
  Rng rng(2024);
  ExperimentFile file;
  file.name = "reference-qa";
  file.description = "Synthetic grounded QA run over a small document set.";
  file.timestamp = "2024-05-01T10:00:00Z";

  file.models = {
      {"model-a", "Model A", std::string("largest configuration")},
      {"model-b", "Model B", std::nullopt},
      {"model-c", "Model C", std::string("distilled")},
  };
  const std::array base = {0.78, 0.6, 0.38};
  const std::array response_words = {22, 34, 11};

  file.metrics.push_back(categorical("faithfulness", "Faithfulness", AuthorType::human,
                                     {{"no", 0.0}, {"partial", 0.5}, {"yes", 1.0}}));
  file.metrics.push_back(categorical("answer_relevance", "Answer relevance", AuthorType::human,
                                     {{"1", 1}, {"2", 2}, {"3", 3}, {"4", 4}, {"5", 5}}));
  file.metrics.push_back(numeric("rouge_l", "ROUGE-L", 0.0, 1.0));
  file.metrics.push_back(numeric("extractiveness", "Extractiveness", 0.0, 1.0));
  file.metrics[0].scale.values[1].display = "Partially";

  const std::array<const char *, 3> annotators = {"ann-1", "ann-2", "ann-3"};
  const std::array flip_rate = {0.1, 0.1, 0.15};
  const std::array mean_seconds = {30.0, 45.0, 20.0};

  constexpr std::size_t kTasks = 20;
  for (std::size_t d = 1; d <= kTasks + 1; ++d) {
    Document doc;
    doc.document_id = "doc-" + two_digit(d);
    doc.title = "Passage " + std::to_string(d);
    doc.text = words(rng, 40 + d);
    if (d % 3 == 0) doc.url = "https://example.org/passage/" + std::to_string(d);
    file.documents.push_back(std::move(doc));
  }
  // Never referenced; the mutation suite duplicates its id.
  file.documents.push_back({"doc-spare", words(rng, 12), std::nullopt, std::nullopt});

  const std::array<const char *, 3> question_types = {"factoid", "descriptive", "comparison"};
  const std::array<const char *, 4> domains = {"science", "history", "finance", "health"};
  for (std::size_t t = 1; t <= kTasks; ++t) {
    Task task;
    task.task_id = "t-" + two_digit(t);
    if (t == 3) {
      task.input.push_back({Speaker::user, words(rng, 6) + "?"});
      task.input.push_back({Speaker::agent, words(rng, 9) + "."});
    }
    task.input.push_back({Speaker::user, words(rng, 4 + (t * 7) % 13) + "?"});
    task.contexts.push_back("doc-" + two_digit(t));
    if (t == 1) task.contexts.push_back("doc-" + two_digit(kTasks + 1));
    const bool answerable = t <= 12;
    if (t != 5) task.targets = std::vector<std::string>{answerable ? words(rng, 8) : "unanswerable"};
    task.metadata["answerability"] = answerable ? "answerable" : "unanswerable";
    task.metadata["question_type"] = question_types[t % question_types.size()];
    task.metadata["domain"] = domains[t % domains.size()];
    file.tasks.push_back(std::move(task));
  }

  for (std::size_t t = 0; t < kTasks; ++t) {
    const double difficulty = 0.3 * (rng.uniform() - 0.5);
    for (std::size_t m = 0; m < file.models.size(); ++m) {
      const double q = clamp01(base[m] + difficulty + 0.2 * (rng.uniform() - 0.5));
      Evaluation eval;
      eval.task_id = file.tasks[t].task_id;
      eval.model_id = file.models[m].model_id;
      eval.model_response = words(rng, response_words[m] + rng.index(8)) + ".";

      const std::size_t faithful = three_way(q);
      const auto relevance = static_cast<std::size_t>(std::lround(q * 4.0));
      for (std::size_t a = 0; a < annotators.size(); ++a) {
        const double seconds = mean_seconds[a] * (0.6 + 0.8 * rng.uniform());
        std::size_t label = rng.chance(flip_rate[a]) ? flip(rng, faithful, 3) : faithful;
        eval.annotations["faithfulness"][annotators[a]] =
            rate(file.metrics[0].scale.values[label].value, seconds);
        std::size_t likert = relevance;
        if (rng.chance(0.2)) likert = rng.chance(0.5) ? std::min<std::size_t>(likert + 1, 4)
                                                      : (likert == 0 ? 0 : likert - 1);
        eval.annotations["answer_relevance"][annotators[a]] =
            rate(file.metrics[1].scale.values[likert].value, seconds * 0.5);
      }
      eval.annotations["rouge_l"]["rouge"] =
          score(round3(std::clamp(0.1 + 0.6 * q + 0.1 * (rng.uniform() - 0.5), 0.0, 0.79)));
      eval.annotations["extractiveness"]["extractiveness"] = score(round3(rng.uniform()));
      file.evaluations.push_back(std::move(eval));
    }
  }
  return file;
}

InsightFixture insight_experiment(std::uint64_t seed) {
  Rng rng(seed);
  InsightFixture out;
  out.planted_model = "verbose-loser";
  out.planted_annotator = "ann-5";
  out.win_metric = "win_rate";

  ExperimentFile &file = out.file;
  file.name = "planted-insights";
  file.description = "Synthetic run with one verbose losing model and one careless annotator.";

  file.models = {
      {"m-alpha", "Alpha", std::nullopt},
      {"m-beta", "Beta", std::nullopt},
      {"m-gamma", "Gamma", std::nullopt},
      {out.planted_model, "Verbose", std::string("long, unfaithful answers")},
  };
  const std::array base = {0.75, 0.68, 0.55, 0.22};
  const std::array faithful_base = {0.8, 0.72, 0.6, 0.25};

  file.metrics.push_back(categorical(out.win_metric, "Win rate vs reference", AuthorType::human,
                                     {{"lose", 0.0}, {"tie", 0.5}, {"win", 1.0}}));
  file.metrics.push_back(categorical("faithfulness", "Faithfulness", AuthorType::human,
                                     {{"no", 0.0}, {"partial", 0.5}, {"yes", 1.0}}));
  file.metrics.push_back(numeric("response_length", "Response length", 0.0, 1000.0, false));
  file.metrics.push_back(numeric("extractiveness", "Extractiveness", 0.0, 1.0));

  const std::array<const char *, 5> annotators = {"ann-1", "ann-2", "ann-3", "ann-4", "ann-5"};
  const std::array flip_rate = {0.05, 0.05, 0.05, 0.05, 0.3};
  const std::array mean_seconds = {40.0, 35.0, 50.0, 45.0, 9.0};

  constexpr std::size_t kTasks = 60;
  for (std::size_t t = 1; t <= kTasks; ++t) {
    const std::string suffix = (t < 10 ? "0" : "") + std::to_string(t);
    file.documents.push_back({"p-" + suffix, words(rng, 60), std::nullopt, std::nullopt});
    Task task;
    task.task_id = "q-" + suffix;
    task.input.push_back({Speaker::user, words(rng, 5 + rng.index(15)) + "?"});
    task.contexts.push_back("p-" + suffix);
    task.targets = std::vector<std::string>{words(rng, 10)};
    task.metadata["answerability"] = t % 4 == 0 ? "unanswerable" : "answerable";
    task.metadata["question_type"] = t % 2 == 0 ? "factoid" : "descriptive";
    file.tasks.push_back(std::move(task));
  }

  for (std::size_t t = 0; t < kTasks; ++t) {
    for (std::size_t m = 0; m < file.models.size(); ++m) {
      const bool verbose = file.models[m].model_id == out.planted_model;
      Evaluation eval;
      eval.task_id = file.tasks[t].task_id;
      eval.model_id = file.models[m].model_id;
      eval.model_response = words(rng, verbose ? 120 + rng.index(80) : 20 + rng.index(40)) + ".";

      const std::size_t win = three_way(clamp01(base[m] + 0.3 * (rng.uniform() - 0.5)));
      const std::size_t faithful =
          three_way(clamp01(faithful_base[m] + 0.3 * (rng.uniform() - 0.5)));
      for (std::size_t a = 0; a < annotators.size(); ++a) {
        const double seconds = mean_seconds[a] * (0.6 + 0.8 * rng.uniform());
        const std::size_t w = rng.chance(flip_rate[a]) ? flip(rng, win, 3) : win;
        const std::size_t f = rng.chance(flip_rate[a]) ? flip(rng, faithful, 3) : faithful;
        eval.annotations[out.win_metric][annotators[a]] =
            rate(file.metrics[0].scale.values[w].value, seconds);
        eval.annotations["faithfulness"][annotators[a]] =
            rate(file.metrics[1].scale.values[f].value, seconds);
      }
      eval.annotations["response_length"]["tokenizer"] =
          score(static_cast<double>(std::count(eval.model_response.begin(),
                                               eval.model_response.end(), ' ') + 1));
      eval.annotations["extractiveness"]["extractiveness"] =
          score(round3(verbose ? 0.2 * rng.uniform() : 0.3 + 0.6 * rng.uniform()));
      file.evaluations.push_back(std::move(eval));
    }
  }
  return out;
}

}  // namespace ragscope::synthetic
