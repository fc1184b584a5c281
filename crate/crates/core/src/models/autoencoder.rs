use super::classifier::check_labels;
use super::layers::{bce_from_logit, Embedding, Mask, Seq};
use super::recurrent::{LstmCache, LstmLayer};
use crate::error::{Error, Result};
use crate::lexer::EncodedSequence;
use crate::nn::{sigmoid_scalar, Dense, Parameter, Tensor};
use crate::rng::Rng;

/// Sequence autoencoder: an encoder LSTM compresses the embedded sequence to
/// its final hidden state, a decoder LSTM fed that state at every step
/// reconstructs the embedded tokens through a linear projection. A logistic
/// head on the encoder state turns it into a classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmAutoencoder {
    pub embedding: Embedding,
    pub encoder: LstmLayer,
    pub decoder: LstmLayer,
    pub output: Dense,
    pub head: Dense,
    pub head_trained: bool,
}

struct ReconCache {
    enc: EncodeCache,
    dec_in: Seq,
    dec: LstmCache,
    flat: Tensor,
    diff: Tensor,
    per_seq: Vec<f64>,
    valid: usize,
}

struct EncodeCache {
    x: Seq,
    mask: Mask,
    enc: LstmCache,
    code: Vec<f64>,
}

impl LstmAutoencoder {
    pub fn new(embedding: Embedding, encoder_hidden: usize, decoder_hidden: usize, rng: &mut Rng) -> Self {
        let e = embedding.dim();
        LstmAutoencoder {
            encoder: LstmLayer::new(e, encoder_hidden, rng),
            decoder: LstmLayer::new(encoder_hidden, decoder_hidden, rng),
            output: Dense::new(decoder_hidden, e, rng),
            head: Dense::new(encoder_hidden, 1, rng),
            embedding,
            head_trained: false,
        }
    }

    fn encode(&self, seqs: &[&EncodedSequence]) -> Result<EncodeCache> {
        let (x, mask) = self.embedding.lookup(seqs)?;
        let (out, enc) = self.encoder.forward(&x, &mask, false)?;
        let code = out.at(out.steps - 1).to_vec();
        Ok(EncodeCache { x, mask, enc, code })
    }

    fn encoder_backward(&mut self, seqs: &[&EncodedSequence], cache: &EncodeCache, dcode: &[f64], embedding: bool) {
        let hd = self.encoder.hidden_size();
        let mut dout = Seq::zeros(cache.x.steps, cache.x.batch, hd);
        dout.at_mut(cache.x.steps - 1).copy_from_slice(dcode);
        let dx = self.encoder.backward(&cache.x, &cache.mask, &cache.enc, &dout, false);
        if embedding {
            self.embedding.backward(seqs, &dx);
        }
    }

    /// Encoder final hidden states, one row per sequence.
    pub fn codes(&self, seqs: &[&EncodedSequence]) -> Result<Tensor> {
        let c = self.encode(seqs)?;
        Tensor::matrix(seqs.len(), self.encoder.hidden_size(), c.code)
    }

    fn reconstruct(&self, seqs: &[&EncodedSequence]) -> Result<ReconCache> {
        let enc = self.encode(seqs)?;
        let (steps, batch, hd) = (enc.x.steps, enc.x.batch, self.encoder.hidden_size());
        let mut dec_in = Seq::zeros(steps, batch, hd);
        for t in 0..steps {
            dec_in.at_mut(t).copy_from_slice(&enc.code);
        }
        let (dec_out, dec) = self.decoder.forward(&dec_in, &enc.mask, false)?;
        let flat = Tensor::matrix(steps * batch, self.decoder.hidden_size(), dec_out.data)?;
        let recon = self.output.forward(&flat)?;
        let e = enc.x.dim;
        let mut per_seq = vec![0.0; batch];
        let mut diff = Tensor::zeros(&[steps * batch, e]);
        for t in 0..steps {
            for b in 0..batch {
                if !enc.mask.is_valid(t, b) {
                    continue;
                }
                let r = t * batch + b;
                let d = diff.row_mut(r);
                for k in 0..e {
                    d[k] = recon.row(r)[k] - enc.x.row(t, b)[k];
                    per_seq[b] += d[k] * d[k];
                }
            }
        }
        let valid = enc.mask.count();
        Ok(ReconCache {
            enc,
            dec_in,
            dec,
            flat,
            diff,
            per_seq,
            valid,
        })
    }

    fn reconstruct_backward(&mut self, seqs: &[&EncodedSequence], c: &ReconCache) {
        if c.valid == 0 {
            return;
        }
        let (steps, batch) = (c.enc.x.steps, c.enc.x.batch);
        let scale = 2.0 / (c.valid * c.enc.x.dim) as f64;
        let drecon = c.diff.map(|v| v * scale);
        let ddec = self.output.backward(&c.flat, &drecon);
        let ddec = Seq {
            steps,
            batch,
            dim: self.decoder.hidden_size(),
            data: ddec.into_data(),
        };
        let din = self.decoder.backward(&c.dec_in, &c.enc.mask, &c.dec, &ddec, false);
        let mut dcode = vec![0.0; c.enc.code.len()];
        for t in 0..steps {
            dcode.iter_mut().zip(din.at(t)).for_each(|(a, d)| *a += d);
        }
        self.encoder_backward(seqs, &c.enc, &dcode, false);
    }

    /// Mean squared reconstruction error over all real tokens of the batch,
    /// accumulating gradients into encoder, decoder and projection.
    pub fn reconstruction_loss_and_grad(&mut self, seqs: &[&EncodedSequence]) -> Result<f64> {
        let c = self.reconstruct(seqs)?;
        self.reconstruct_backward(seqs, &c);
        Ok(mean_error(&c.per_seq, c.valid, self.embedding.dim()))
    }

    pub fn reconstruction_loss(&self, seqs: &[&EncodedSequence]) -> Result<f64> {
        let c = self.reconstruct(seqs)?;
        Ok(mean_error(&c.per_seq, c.valid, self.embedding.dim()))
    }

    /// Per-sequence mean squared reconstruction error (0 for all-padding input).
    pub fn reconstruction_errors(&self, seqs: &[&EncodedSequence]) -> Result<Vec<f64>> {
        let e = self.embedding.dim() as f64;
        let c = self.reconstruct(seqs)?;
        Ok(seqs
            .iter()
            .zip(&c.per_seq)
            .map(|(s, &err)| {
                let n = s.valid_len() as f64;
                if n == 0.0 {
                    0.0
                } else {
                    err / (n * e)
                }
            })
            .collect())
    }

    pub fn logits(&self, seqs: &[&EncodedSequence]) -> Result<Vec<f64>> {
        let codes = self.codes(seqs)?;
        Ok(self.head.forward(&codes)?.into_data())
    }

    pub fn predict(&self, seqs: &[&EncodedSequence]) -> Result<Vec<f64>> {
        if !self.head_trained {
            return Err(Error::State("autoencoder classification head has not been trained".into()));
        }
        Ok(self.logits(seqs)?.into_iter().map(sigmoid_scalar).collect())
    }

    /// Mean BCE of the head on encoder states. With `fine_tune` the gradient
    /// continues into the encoder (and a trainable embedding).
    pub fn classification_loss_and_grad(&mut self, seqs: &[&EncodedSequence], labels: &[f64], fine_tune: bool) -> Result<f64> {
        check_labels(seqs.len(), labels)?;
        let enc = self.encode(seqs)?;
        let codes = Tensor::matrix(seqs.len(), self.encoder.hidden_size(), enc.code.clone())?;
        let logits = self.head.forward(&codes)?.into_data();
        let n = seqs.len() as f64;
        let mut loss = 0.0;
        let mut dlogit = Tensor::zeros(&[seqs.len(), 1]);
        for (b, (&z, &y)) in logits.iter().zip(labels).enumerate() {
            loss += bce_from_logit(z, y);
            dlogit.data_mut()[b] = (sigmoid_scalar(z) - y) / n;
        }
        let dcode = self.head.backward(&codes, &dlogit);
        if fine_tune {
            self.encoder_backward(seqs, &enc, dcode.data(), true);
        }
        Ok(loss / n)
    }

    pub fn classification_loss(&self, seqs: &[&EncodedSequence], labels: &[f64]) -> Result<f64> {
        check_labels(seqs.len(), labels)?;
        let total: f64 = self
            .logits(seqs)?
            .iter()
            .zip(labels)
            .map(|(&z, &y)| bce_from_logit(z, y))
            .sum();
        Ok(total / seqs.len() as f64)
    }

    pub fn parameters(&self) -> Vec<(String, &Parameter)> {
        let mut out = vec![("embedding.table".to_string(), &self.embedding.table)];
        for (prefix, cell) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (n, p) in cell.parameters() {
                out.push((format!("{prefix}.{n}"), p));
            }
        }
        out.push(("output.weight".into(), &self.output.weight));
        out.push(("output.bias".into(), &self.output.bias));
        out.push(("head.weight".into(), &self.head.weight));
        out.push(("head.bias".into(), &self.head.bias));
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = vec![&mut self.embedding.table];
        out.extend(self.encoder.parameters_mut());
        out.extend(self.decoder.parameters_mut());
        out.extend(self.output.parameters_mut());
        out.extend(self.head.parameters_mut());
        out
    }

    /// Encoder, decoder and projection: what reconstruction training updates.
    pub fn reconstruction_mut(&mut self) -> Vec<&mut Parameter> {
        let mut out = self.encoder.parameters_mut();
        out.extend(self.decoder.parameters_mut());
        out.extend(self.output.parameters_mut());
        out
    }

    /// Head, plus encoder and trainable embedding when fine-tuning.
    pub fn classification_mut(&mut self, fine_tune: bool) -> Vec<&mut Parameter> {
        let mut out = Vec::new();
        if fine_tune {
            if self.embedding.trainable {
                out.push(&mut self.embedding.table);
            }
            out.extend(self.encoder.parameters_mut());
        }
        out.extend(self.head.parameters_mut());
        out
    }
}

fn mean_error(per_seq: &[f64], valid: usize, dim: usize) -> f64 {
    if valid == 0 {
        0.0
    } else {
        per_seq.iter().sum::<f64>() / (valid * dim) as f64
    }
}
