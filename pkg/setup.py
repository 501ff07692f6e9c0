from setuptools import setup, find_packages

with open('README.md') as readme_file:
    README = readme_file.read()

setup_args = dict(
    name='rfsense',
    version='0.1.0',
    description='Diffraction body model, generative surrogate and Bayesian RF sensing experiments',
    long_description_content_type="text/markdown",
    long_description=README,
    license='GPL',
    packages=find_packages(),
    scripts=['rfsense-cli.py'],
    keywords=['RF sensing', 'diffraction', 'variational autoencoder', 'localization'],
    python_requires='>=3.8',
)

install_requires = [
    'coloredlogs',
    'numpy>=1.25',
    'scipy'
]

if __name__ == '__main__':
    setup(**setup_args, install_requires=install_requires)
