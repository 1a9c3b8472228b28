use serde::{Deserialize, Serialize};

use super::archive::NamedTensors;
use crate::error::{Error, Result};

/// One fully connected layer, weights row-major `[out][in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }
}

/// Multi-layer perceptron with ReLU between layers and a linear output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layers: Vec<Dense>,
}

impl MlpSpec {
    pub fn zeros(widths: &[usize]) -> Self {
        Self {
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::shape(format!("mlp layer {i} has inconsistent buffers")));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::shape(format!(
                    "mlp layer {i} expects {} inputs but previous layer emits {}",
                    l.inputs,
                    self.layers[i - 1].outputs
                )));
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.validate()?;
        let first = self.layers.first().map(|l| l.inputs).unwrap_or(input.len());
        if input.len() != first {
            return Err(Error::shape(format!(
                "mlp expects {first} inputs, got {}",
                input.len()
            )));
        }
        let mut x = input.to_vec();
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(&x);
            if i != last {
                x.iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(x)
    }

    pub fn export(&self, prefix: &str, named: &mut NamedTensors) {
        for (i, l) in self.layers.iter().enumerate() {
            named.insert_f64(format!("{prefix}.{i}.w"), vec![l.outputs, l.inputs], &l.weights);
            named.insert_f64(format!("{prefix}.{i}.b"), vec![l.outputs], &l.bias);
        }
    }

    pub fn import(&mut self, prefix: &str, named: &NamedTensors, missing: &mut Vec<String>) -> Result<()> {
        for (i, l) in self.layers.iter_mut().enumerate() {
            let wname = format!("{prefix}.{i}.w");
            match named.get_f64(&wname, l.weights.len())? {
                Some(w) => l.weights = w,
                None => missing.push(wname),
            }
            let bname = format!("{prefix}.{i}.b");
            match named.get_f64(&bname, l.bias.len())? {
                Some(b) => l.bias = b,
                None => missing.push(bname),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_relu_and_linear_output() {
        let mut m = MlpSpec::zeros(&[2, 2, 1]);
        m.layers[0].weights = vec![1.0, 0.0, 0.0, -1.0];
        m.layers[1].weights = vec![1.0, 1.0];
        m.layers[1].bias = vec![-0.5];
        // hidden = relu([3, -4]) = [3, 0]; out = 3 - 0.5
        assert_eq!(m.forward(&[3.0, 4.0]).unwrap(), vec![2.5]);
    }

    #[test]
    fn incompatible_widths_rejected() {
        let mut m = MlpSpec::zeros(&[2, 3, 1]);
        m.layers[1] = Dense::zeros(4, 1);
        assert!(m.forward(&[0.0, 0.0]).is_err());
    }
}
