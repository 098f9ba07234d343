use serde::{Deserialize, Serialize};

/// Role of a token in the synthetic caption grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    /// Article or sentence opener; the payload indexes the scene's article list.
    Article(usize),
    GtObject,
    HalObject,
    Connective,
    Eos,
    Filler,
}

impl TokenClass {
    pub fn label(self) -> &'static str {
        match self {
            TokenClass::Article(_) => "article",
            TokenClass::GtObject => "gt",
            TokenClass::HalObject => "hal",
            TokenClass::Connective => "connective",
            TokenClass::Eos => "eos",
            TokenClass::Filler => "filler",
        }
    }

    pub fn is_noun(self) -> bool {
        matches!(self, TokenClass::GtObject | TokenClass::HalObject)
    }
}

/// Position in the article → noun → connective cycle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrammarState {
    #[default]
    Start,
    /// Carries the index of the article just emitted.
    AfterArticle(usize),
    AfterNoun,
    AfterConnective,
    Done,
}

impl GrammarState {
    /// Next state after emitting a token of class `class`. Inadmissible
    /// emissions still move the state by the token's class; fillers leave it
    /// unchanged.
    pub fn advance(self, class: TokenClass) -> GrammarState {
        match class {
            TokenClass::Article(a) => GrammarState::AfterArticle(a),
            TokenClass::GtObject | TokenClass::HalObject => GrammarState::AfterNoun,
            TokenClass::Connective => GrammarState::AfterConnective,
            TokenClass::Eos => GrammarState::Done,
            TokenClass::Filler => self,
        }
    }

    pub fn admits(self, class: TokenClass) -> bool {
        match self {
            GrammarState::Start | GrammarState::AfterConnective => matches!(class, TokenClass::Article(_)),
            GrammarState::AfterArticle(_) => class.is_noun(),
            GrammarState::AfterNoun => matches!(class, TokenClass::Connective | TokenClass::Eos),
            GrammarState::Done => class == TokenClass::Eos,
        }
    }

    pub fn admits_nouns(self) -> bool {
        matches!(self, GrammarState::AfterArticle(_))
    }

    pub fn replay(classes: impl IntoIterator<Item = TokenClass>) -> GrammarState {
        classes.into_iter().fold(GrammarState::Start, GrammarState::advance)
    }
}
