use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grammar::{GrammarState, TokenClass};
use crate::error::{Error, Result};
use crate::logits::{TokenId, Vocabulary};
use crate::metrics::{Annotation, ObjectLexicon};
use crate::strategies::TokenRoles;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenLogit {
    pub token: String,
    pub logit: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleSpec {
    pub token: String,
    /// Base logit in article positions (sentence start, after a connective).
    pub logit: f64,
    /// Added to every hallucination-prone noun right after this article.
    #[serde(default)]
    pub hal_bias: f64,
}

/// Human-editable description of a synthetic scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub name: String,
    pub articles: Vec<ArticleSpec>,
    pub gt_objects: Vec<TokenLogit>,
    pub hal_objects: Vec<TokenLogit>,
    /// Hallucination targets that are perceptually plausible for the scene.
    #[serde(default)]
    pub cognition_objects: Vec<String>,
    pub connectives: Vec<TokenLogit>,
    pub eos: TokenLogit,
    #[serde(default)]
    pub fillers: Vec<String>,
    #[serde(default)]
    pub filler_logit: f64,
    /// Subtracted from every token the grammar does not admit in the current state.
    pub inadmissible_penalty: f64,
    pub decay_kappa: f64,
    pub decay_depth: f64,
    pub noise_sigma: f64,
}

impl SceneSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("scene", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn compile(&self) -> Result<Scene> {
        Scene::new(self.clone())
    }
}

/// A validated scene with precomputed token tables.
#[derive(Clone, Debug)]
pub struct Scene {
    spec: SceneSpec,
    vocab: Vocabulary,
    classes: Vec<TokenClass>,
    base: Vec<f64>,
    gt: Vec<TokenId>,
    hal: Vec<TokenId>,
    articles: Vec<TokenId>,
    cognition: Vec<TokenId>,
    eos: TokenId,
    the: TokenId,
}

impl Scene {
    pub fn new(spec: SceneSpec) -> Result<Self> {
        let f = |field: &str, v: f64, ok: bool| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("scene.{field}"), format!("invalid value {v}")))
            }
        };
        f("decay_kappa", spec.decay_kappa, spec.decay_kappa > 0.0)?;
        f("decay_depth", spec.decay_depth, spec.decay_depth >= 0.0)?;
        f("noise_sigma", spec.noise_sigma, spec.noise_sigma >= 0.0)?;
        f("inadmissible_penalty", spec.inadmissible_penalty, spec.inadmissible_penalty >= 0.0)?;
        if spec.articles.is_empty() || spec.gt_objects.is_empty() || spec.hal_objects.is_empty() {
            return Err(Error::config("scene", "articles, gt_objects and hal_objects must be nonempty"));
        }
        if spec.connectives.is_empty() {
            return Err(Error::config("scene.connectives", "must be nonempty"));
        }

        let mut tokens = Vec::new();
        let mut classes = Vec::new();
        let mut base = Vec::new();
        let mut push = |tok: &str, class: TokenClass, logit: f64, field: &str| -> Result<()> {
            if !logit.is_finite() {
                return Err(Error::config(format!("scene.{field}"), format!("logit for {tok:?} is not finite")));
            }
            tokens.push(tok.to_string());
            classes.push(class);
            base.push(logit);
            Ok(())
        };
        for (i, a) in spec.articles.iter().enumerate() {
            if !a.hal_bias.is_finite() {
                return Err(Error::config("scene.articles", format!("hal_bias for {:?} is not finite", a.token)));
            }
            push(&a.token, TokenClass::Article(i), a.logit, "articles")?;
        }
        for o in &spec.gt_objects {
            push(&o.token, TokenClass::GtObject, o.logit, "gt_objects")?;
        }
        for o in &spec.hal_objects {
            push(&o.token, TokenClass::HalObject, o.logit, "hal_objects")?;
        }
        for c in &spec.connectives {
            push(&c.token, TokenClass::Connective, c.logit, "connectives")?;
        }
        push(&spec.eos.token, TokenClass::Eos, spec.eos.logit, "eos")?;
        for w in &spec.fillers {
            push(w, TokenClass::Filler, spec.filler_logit, "filler_logit")?;
        }

        // Duplicates across roles would make the sets overlap.
        let vocab = Vocabulary::new(tokens.clone()).map_err(|e| Error::config("scene", e.to_string()))?;

        let ids_of = |class: fn(TokenClass) -> bool| -> Vec<TokenId> {
            classes.iter().enumerate().filter(|(_, &c)| class(c)).map(|(i, _)| TokenId(i)).collect()
        };
        let gt = ids_of(|c| c == TokenClass::GtObject);
        let hal = ids_of(|c| c == TokenClass::HalObject);
        let articles = ids_of(|c| matches!(c, TokenClass::Article(_)));
        let eos = vocab.id(&spec.eos.token).expect("eos pushed");

        let hal_names: HashSet<&str> = spec.hal_objects.iter().map(|o| o.token.as_str()).collect();
        let mut cognition = Vec::new();
        for c in &spec.cognition_objects {
            if !hal_names.contains(c.as_str()) {
                return Err(Error::config(
                    "scene.cognition_objects",
                    format!("{c:?} is not a hallucination-prone object"),
                ));
            }
            cognition.push(vocab.id(c).expect("hal token in vocabulary"));
        }

        let the = vocab
            .id("The")
            .filter(|id| matches!(classes[id.0], TokenClass::Article(_)))
            .ok_or_else(|| Error::config("scene.articles", "the article list must contain \"The\""))?;

        let scene = Self { spec, vocab, classes, base, gt, hal, articles, cognition, eos, the };
        let first = scene.base_logits(GrammarState::Start, 0);
        let top = first
            .iter()
            .enumerate()
            .fold(0, |best, (i, &v)| if v > first[best] { i } else { best });
        if TokenId(top) != scene.the {
            return Err(Error::config(
                "scene.articles",
                format!("\"The\" must be the top first-step token, found {:?}", scene.vocab.token(TokenId(top))),
            ));
        }
        Ok(scene)
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn classes(&self) -> &[TokenClass] {
        &self.classes
    }

    pub fn class(&self, id: TokenId) -> TokenClass {
        self.classes[id.0]
    }

    pub fn gt_ids(&self) -> &[TokenId] {
        &self.gt
    }

    pub fn hal_ids(&self) -> &[TokenId] {
        &self.hal
    }

    pub fn article_ids(&self) -> &[TokenId] {
        &self.articles
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn the_token(&self) -> TokenId {
        self.the
    }

    pub fn state_after(&self, history: &[TokenId]) -> GrammarState {
        GrammarState::replay(history.iter().map(|&id| self.class(id)))
    }

    /// `decay_depth * (1 - exp(-decay_kappa * t))`
    pub fn decay_shift(&self, t: usize) -> f64 {
        self.spec.decay_depth * (1.0 - (-self.spec.decay_kappa * t as f64).exp())
    }

    /// Noise-free logits for `state` at step `t`.
    pub fn base_logits(&self, state: GrammarState, t: usize) -> Vec<f64> {
        let shift = self.decay_shift(t);
        let article_bias = match state {
            GrammarState::AfterArticle(a) => self.spec.articles[a].hal_bias,
            _ => 0.0,
        };
        self.classes
            .iter()
            .zip(&self.base)
            .map(|(&class, &b)| {
                let v = match class {
                    TokenClass::GtObject => b - shift,
                    TokenClass::HalObject => b + shift + article_bias,
                    _ => b,
                };
                if state.admits(class) {
                    v
                } else {
                    v - self.spec.inadmissible_penalty
                }
            })
            .collect()
    }

    /// Mean ground-truth logit minus mean hallucination logit.
    pub fn margin(&self, scores: &[f64]) -> f64 {
        let mean = |ids: &[TokenId]| ids.iter().map(|id| scores[id.0]).sum::<f64>() / ids.len() as f64;
        mean(&self.gt) - mean(&self.hal)
    }

    pub fn roles(&self) -> TokenRoles {
        TokenRoles {
            is_noun: self.classes.iter().map(|c| c.is_noun()).collect(),
            the_token: Some(self.the),
        }
    }

    /// Ground truth for captions generated from this scene.
    pub fn annotation(&self) -> Annotation {
        let names = |ids: &[TokenId]| ids.iter().map(|&id| self.vocab.token(id).to_lowercase()).collect();
        Annotation {
            item_id: self.spec.name.clone(),
            gt_objects: names(&self.gt),
            cognition_objects: names(&self.cognition),
        }
    }

    /// Each object token is its own (lowercase) surface form.
    pub fn lexicon(&self) -> ObjectLexicon {
        let entries = self
            .gt
            .iter()
            .chain(&self.hal)
            .map(|&id| {
                let name = self.vocab.token(id).to_lowercase();
                (name.clone(), vec![name])
            })
            .collect();
        ObjectLexicon::new(entries).expect("object tokens are unique")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::preset;

    #[test]
    fn toml_round_trip() {
        let spec = preset("default").unwrap();
        let text = spec.to_toml_string();
        assert_eq!(SceneSpec::from_toml_str(&text).unwrap(), spec);
    }

    #[test]
    fn validation() {
        let good = preset("default").unwrap();

        let mut s = good.clone();
        s.hal_objects[0].token = s.gt_objects[0].token.clone();
        assert!(matches!(s.compile(), Err(Error::Config { .. })));

        let mut s = good.clone();
        s.articles[0].logit = -5.0;
        assert!(s.compile().is_err(), "The must lead the first step");

        let mut s = good.clone();
        s.cognition_objects = vec!["dog".into()];
        assert!(s.compile().is_err());

        let mut s = good.clone();
        s.decay_kappa = 0.0;
        assert!(s.compile().is_err());

        let mut s = good;
        s.articles.retain(|a| a.token != "The");
        assert!(s.compile().is_err());
    }

    #[test]
    fn default_scene_shape() {
        let scene = preset("default").unwrap().compile().unwrap();
        assert_eq!(scene.vocab().len(), 48);
        assert_eq!(scene.articles.len(), 4);
        assert_eq!(scene.gt.len(), 8);
        assert_eq!(scene.hal.len(), 8);
        assert!((scene.margin(&scene.base_logits(GrammarState::Start, 0)) - 2.0).abs() < 1e-12);
        let roles = scene.roles();
        assert_eq!(roles.is_noun.iter().filter(|&&n| n).count(), 16);
        assert_eq!(scene.lexicon().len(), 16);
        assert_eq!(scene.annotation().gt_objects.len(), 8);
    }
}
