use crate::datagen::{phi_features, Domain, PhiFeatures, SampleRecord, World, PAD_ITEM};
use crate::error::{EcatError, Result};
use crate::numerics::Tensor;

/// Discriminator input. Only constructible from [`PhiFeatures`], so nothing
/// else can reach the discriminator.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiBatch(Tensor);

impl PhiBatch {
    pub fn from_features(features: &[PhiFeatures]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = features.iter().map(|p| p.as_slice().to_vec()).collect();
        Ok(PhiBatch(Tensor::from_rows(&rows)?))
    }

    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Column-oriented view of a list of records, ready for the models.
#[derive(Clone, Debug)]
pub struct Batch {
    pub users: Vec<usize>,
    pub items: Vec<usize>,
    /// Row-major `[len, seq_len]`; padding mapped to item 0 and masked out.
    pub seq_items: Vec<usize>,
    pub seq_keep: Vec<bool>,
    /// `[len, 1]`, 1.0 where the whole sequence is padding.
    pub all_pad: Tensor,
    pub numeric: Tensor,
    pub labels: Vec<f64>,
    pub domains: Vec<Domain>,
    pub phi: PhiBatch,
    pub seq_len: usize,
}

impl Batch {
    pub fn from_records(world: &World, records: &[&SampleRecord]) -> Result<Self> {
        let n_users = world.config.n_users;
        let n_items = world.config.n_items;
        let first = records.first().ok_or_else(|| EcatError::Data("empty batch".into()))?;
        let seq_len = first.behavior_seq.len();
        let d_num = first.numeric_features.len();
        let b = records.len();
        let mut users = Vec::with_capacity(b);
        let mut items = Vec::with_capacity(b);
        let mut seq_items = Vec::with_capacity(b * seq_len);
        let mut seq_keep = Vec::with_capacity(b * seq_len);
        let mut all_pad = Vec::with_capacity(b);
        let mut numeric = Vec::with_capacity(b * d_num);
        let mut phi = Vec::with_capacity(b);
        for r in records {
            if r.user_id as usize >= n_users || r.item_id as usize >= n_items {
                return Err(EcatError::Data(format!(
                    "out-of-vocabulary record (user {}, item {})",
                    r.user_id, r.item_id
                )));
            }
            if r.behavior_seq.len() != seq_len || r.numeric_features.len() != d_num {
                return Err(EcatError::Dimension("records in a batch disagree on sequence or feature length".into()));
            }
            users.push(r.user_id as usize);
            items.push(r.item_id as usize);
            let mut any = false;
            for &i in &r.behavior_seq {
                if i == PAD_ITEM {
                    seq_items.push(0);
                    seq_keep.push(false);
                } else if i as usize >= n_items {
                    return Err(EcatError::Data(format!("out-of-vocabulary sequence item {i}")));
                } else {
                    seq_items.push(i as usize);
                    seq_keep.push(true);
                    any = true;
                }
            }
            all_pad.push(if any { 0.0 } else { 1.0 });
            numeric.extend_from_slice(&r.numeric_features);
            phi.push(phi_features(world, r));
        }
        Ok(Batch {
            users,
            items,
            seq_items,
            seq_keep,
            all_pad: Tensor::new(vec![b, 1], all_pad)?,
            numeric: Tensor::new(vec![b, d_num], numeric)?,
            labels: records.iter().map(|r| r.label as f64).collect(),
            domains: records.iter().map(|r| r.domain).collect(),
            phi: PhiBatch::from_features(&phi)?,
            seq_len,
        })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    /// 1.0 for target-domain rows.
    pub fn domain_labels(&self) -> Vec<f64> {
        self.domains.iter().map(|d| if *d == Domain::Target { 1.0 } else { 0.0 }).collect()
    }
}
