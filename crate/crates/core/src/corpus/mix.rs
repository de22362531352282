use super::{CorpusError, ShardRecord, TokenEstimator};

/// Target proportion for interleaving, e.g. 70:1 domain to general tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MixRatio {
    pub domain: u64,
    pub general: u64,
}

impl MixRatio {
    pub fn new(domain: u64, general: u64) -> Result<Self, CorpusError> {
        if domain == 0 || general == 0 {
            return Err(CorpusError::BadRatio(format!("{domain}:{general}")));
        }
        Ok(MixRatio { domain, general })
    }

    pub fn domain_fraction(self) -> f64 {
        self.domain as f64 / (self.domain + self.general) as f64
    }
}

impl std::str::FromStr for MixRatio {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (d, g) = s
            .split_once(':')
            .ok_or_else(|| CorpusError::BadRatio(s.to_string()))?;
        let domain = d
            .trim()
            .parse()
            .map_err(|_| CorpusError::BadRatio(s.to_string()))?;
        let general = g
            .trim()
            .parse()
            .map_err(|_| CorpusError::BadRatio(s.to_string()))?;
        MixRatio::new(domain, general)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixOrigin {
    Domain,
    General,
}

#[derive(Debug, Clone)]
pub struct MixedDocument {
    pub record: ShardRecord,
    pub origin: MixOrigin,
    pub tokens: u64,
}

/// Cumulative token totals as emitted so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct MixStats {
    pub domain_tokens: u64,
    pub general_tokens: u64,
    pub domain_docs: u64,
    pub general_docs: u64,
}

/// Greedy document-level interleaver.
///
/// At each emission the next document comes from the general stream iff
/// cumulative domain tokens D and general tokens G satisfy
/// `D * ratio.general >= G * ratio.domain` and general is non-empty; an
/// exhausted stream stops contributing and the other runs out on its own.
pub struct Mixer<'a, D, G>
where
    D: Iterator<Item = ShardRecord>,
    G: Iterator<Item = ShardRecord>,
{
    domain: std::iter::Peekable<D>,
    general: std::iter::Peekable<G>,
    ratio: MixRatio,
    counter: &'a dyn TokenEstimator,
    stats: MixStats,
}

impl<D, G> Mixer<'_, D, G>
where
    D: Iterator<Item = ShardRecord>,
    G: Iterator<Item = ShardRecord>,
{
    pub fn stats(&self) -> MixStats {
        self.stats
    }
}

impl<D, G> Iterator for Mixer<'_, D, G>
where
    D: Iterator<Item = ShardRecord>,
    G: Iterator<Item = ShardRecord>,
{
    type Item = MixedDocument;

    fn next(&mut self) -> Option<MixedDocument> {
        let domain_ready = self.domain.peek().is_some();
        let general_ready = self.general.peek().is_some();
        if !domain_ready && !general_ready {
            return None;
        }
        let due_general = (self.stats.domain_tokens as u128 * self.ratio.general as u128)
            >= (self.stats.general_tokens as u128 * self.ratio.domain as u128);
        let take_general = general_ready && (due_general || !domain_ready);

        let (record, origin) = if take_general {
            (self.general.next().unwrap(), MixOrigin::General)
        } else {
            (self.domain.next().unwrap(), MixOrigin::Domain)
        };
        let tokens = self.counter.estimate(&record.text);
        match origin {
            MixOrigin::Domain => {
                self.stats.domain_tokens += tokens;
                self.stats.domain_docs += 1;
            }
            MixOrigin::General => {
                self.stats.general_tokens += tokens;
                self.stats.general_docs += 1;
            }
        }
        Some(MixedDocument {
            record,
            origin,
            tokens,
        })
    }
}

/// Interleave two cleaned document streams at a token ratio.
pub fn mix_corpora<'a, D, G>(
    domain: D,
    general: G,
    ratio: MixRatio,
    counter: &'a dyn TokenEstimator,
) -> Mixer<'a, D::IntoIter, G::IntoIter>
where
    D: IntoIterator<Item = ShardRecord>,
    G: IntoIterator<Item = ShardRecord>,
{
    Mixer {
        domain: domain.into_iter().peekable(),
        general: general.into_iter().peekable(),
        ratio,
        counter,
        stats: MixStats::default(),
    }
}
