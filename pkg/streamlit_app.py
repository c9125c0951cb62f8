import json
import os
from datetime import datetime

import pandas as pd
import streamlit as st

# Numerical modules are required; plotting helpers degrade gracefully
from clifford_structures import admissible, hurwitz_radon, min_rep_dimension
from dirichlet_eigen import eigen_table
from gap_bounds import gap_bounds, ratio_asymptotics
from hgap_errors import HGapError
from run_registry import RunRegistry

try:
    from gap_plots import bounds_sweep_figure, ratio_figure, small_dev_figure, survival_figure
    PLOTS_AVAILABLE = True
except ImportError as e:
    PLOTS_AVAILABLE = False
    st.sidebar.warning(f"⚠️ Plotting unavailable: {str(e)[:50]}...")

st.set_page_config(
    page_title="H-type Spectral Gap Viewer",
    page_icon="📊",
    layout="wide",
    initial_sidebar_state="expanded"
)

if 'uploaded_report' not in st.session_state:
    st.session_state.uploaded_report = None

st.markdown("""
<style>
    .command-header {
        background: linear-gradient(90deg, #2c3e50 0%, #34495e 100%);
        color: white;
        padding: 1rem;
        border-radius: 8px;
        margin-bottom: 1rem;
        text-align: center;
    }
</style>
""", unsafe_allow_html=True)


def show_pair_bounds(m: int, n: int):
    """Closed-form sandwich for one (m, n)"""
    st.write(f"### Bounds for H({m},{n})")
    if not admissible(m, n):
        st.error(f"❌ H({m},{n}) does not exist: n must be below rho({m}) = {hurwitz_radon(m)}")
        return
    if m % min_rep_dimension(n):
        st.warning(f"⚠️ The generator construction needs m to be a multiple of {min_rep_dimension(n)}")

    try:
        bounds = gap_bounds(m, n)
    except HGapError as e:
        st.error(f"❌ {type(e).__name__}: {e}")
        return

    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Lower bound", f"{bounds.lower:.6f}")
    col2.metric("Upper bound", f"{bounds.upper:.6f}")
    col3.metric("x*", f"{bounds.x_star:.6f}")
    col4.metric("c = lambda_n / lambda_m", f"{bounds.c:.6f}")
    st.caption(f"upper / lower = {bounds.ratio:.4f}")


def show_sweep(n: int, m_values):
    st.write(f"### Sweep over m at n = {n}")
    try:
        frame = ratio_asymptotics(m_values, n)
    except HGapError as e:
        st.error(f"❌ {type(e).__name__}: {e}")
        return
    if PLOTS_AVAILABLE:
        st.plotly_chart(bounds_sweep_figure(frame), use_container_width=True)
        st.plotly_chart(ratio_figure(frame), use_container_width=True)
    st.dataframe(frame, use_container_width=True)
    st.download_button(
        label="📥 Download CSV",
        data=frame.to_csv(index=False, float_format='%.17g'),
        file_name=f"bounds_sweep_n{n}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.csv",
        mime="text/csv"
    )


def show_eigen_table(d_max: int):
    st.write("### Dirichlet eigenvalues of the unit ball")
    st.dataframe(eigen_table(d_max), use_container_width=True)


def show_report_curves(report: dict):
    """Curves stored in an estimate-gap report.json"""
    structure = report.get('structure', {})
    st.write(f"### Stored run on H({structure.get('m')},{structure.get('n')})")

    bounds = report.get('bounds', {})
    if bounds:
        st.write(f"**Sandwich:** [{bounds['lower']:.6f}, {bounds['upper']:.6f}]")
    for method, est in report.get('estimates', {}).items():
        verdict = report.get('verdicts', {}).get(method, {})
        status = "✅" if verdict.get('verdict') == 'PASS' else "❌"
        st.write(f"{status} **{est['method']}**: {est['lambda_hat']:.5f} ± {est['std_error']:.5f} "
                 f"({verdict.get('verdict', 'n/a')})")

    if not PLOTS_AVAILABLE:
        return
    curves = report.get('curves', {})
    if 'survival' in curves:
        lam = report.get('estimates', {}).get('exit', {}).get('lambda_hat')
        st.plotly_chart(survival_figure(pd.DataFrame(curves['survival']), lam), use_container_width=True)
    if 'small_deviation' in curves:
        st.plotly_chart(small_dev_figure(pd.DataFrame(curves['small_deviation'])), use_container_width=True)


def show_registry():
    registry = RunRegistry()
    st.write(f"### Run registry ({registry.path})")
    if not registry.path.exists():
        st.info("💡 No runs registered yet. Run hgap_cli.py to create some.")
        return
    stats = registry.stats()
    col1, col2 = st.columns(2)
    col1.metric("Total runs", stats['total_runs'])
    col2.metric("Success rate", f"{stats.get('success_rate', 0)}%")
    rows = [{'run_id': r.run_id, 'command': r.command, 'exit_code': r.exit_code,
             'started_at': r.started_at, 'wall_time': r.wall_time} for r in registry.records()]
    st.dataframe(pd.DataFrame(rows), use_container_width=True)


st.markdown('<div class="command-header"><h1>📊 H-TYPE SPECTRAL GAP VIEWER</h1>'
            '<p>Closed-form bounds and stored Monte Carlo runs</p></div>', unsafe_allow_html=True)

with st.sidebar:
    st.write("### Group")
    m = st.number_input("m (horizontal dimension)", min_value=1, max_value=1024, value=2, step=1)
    n = st.number_input("n (center dimension)", min_value=1, max_value=64, value=1, step=1)
    st.write("---")
    st.write("### Sweep")
    m_list_text = st.text_input("m values", value="2,4,8,16,32,64")
    d_max = st.slider("Eigenvalue table up to d", min_value=1, max_value=40, value=20)
    st.write("---")
    uploaded = st.file_uploader("📄 Load report.json", type=['json'])
    if uploaded is not None:
        try:
            st.session_state.uploaded_report = json.load(uploaded)
        except json.JSONDecodeError as e:
            st.error(f"❌ Not a JSON file: {e}")

tab1, tab2, tab3, tab4 = st.tabs(["🎯 Bounds", "📈 Stored runs", "📋 Eigenvalues", "⚙️ Registry"])

with tab1:
    show_pair_bounds(int(m), int(n))
    try:
        m_values = [int(v) for v in m_list_text.split(',') if v.strip()]
    except ValueError:
        st.error("❌ m values must be comma separated integers")
        m_values = []
    if m_values:
        show_sweep(int(n), m_values)

with tab2:
    if st.session_state.uploaded_report:
        show_report_curves(st.session_state.uploaded_report)
    else:
        st.info("💡 Upload a report.json written by `hgap_cli.py estimate-gap`")

with tab3:
    show_eigen_table(int(d_max))

with tab4:
    if os.getenv('HGAP_REGISTRY'):
        st.caption(f"HGAP_REGISTRY = {os.getenv('HGAP_REGISTRY')}")
    show_registry()
