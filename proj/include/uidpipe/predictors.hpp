#pragma once

// Linguistic features of training instances and control variables of
// that-instances.

#include <map>
#include <string>
#include <vector>

#include "uidpipe/cc_extract.hpp"
#include "uidpipe/corpus.hpp"
#include "uidpipe/design.hpp"
#include "uidpipe/lexicon.hpp"
#include "uidpipe/predictor_types.hpp"

namespace uidpipe {

SubjectForm classify_subject_form(const Token& t);

/// Log10 frequency per million. Lexicon entries win (form, then lemma);
/// otherwise the word's add-one smoothed corpus rate is used.
class FrequencyModel {
 public:
  struct Lookup {
    double value = 0.0;
    bool from_lexicon = false;
  };

  FrequencyModel(const Lexicons& lex, const Corpus& corpus);

  Lookup lookup(const Token& t) const;
  double log_frequency(const Token& t) const { return lookup(t).value; }
  std::size_t corpus_tokens() const { return total_; }

 private:
  const Lexicons* lex_;
  std::map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
};

const Utterance& find_utterance(const Corpus& c, const InstanceId& id);

FeatureVector linguistic_features(const TrainingInstance& inst, const Utterance& u,
                                  const Lexicons& lex, const SubcatTable& subcat,
                                  const FrequencyModel& freq);

/// `history` is the conversation's CC record list in temporal order (see
/// ThatDataset::history); only records preceding the instance's CC are used.
ControlVector control_variables(const ThatInstance& inst, const Conversation& conversation,
                                const Lexicons& lex, const std::vector<CCRecord>& history,
                                const FrequencyModel& freq);

/// Table-ready columns for the that-mentioning model. `density` is aligned
/// with `instances`; every instance must carry controls.
DataTable control_table(const std::vector<ThatInstance>& instances,
                        const std::vector<double>& density);

/// Information density followed by the thirteen controls, in report order.
std::vector<TermSpec> that_model_terms();

/// Columns and terms of the classifier's linguistic features, in the
/// incremental-selection order.
DataTable feature_table(const std::vector<FeatureVector>& features);
std::vector<TermSpec> linguistic_feature_terms();

}  // namespace uidpipe
